"""Shoebox binaural room impulse response simulation."""

from .images import ImageSet, ImageSource, enumerate_image_sources, image_set
from .rain import EnergyHistogram, rain_diffusion
from .render import BinauralRir, render_specular_rir
from .room import (InvalidSceneError, RoomSpec, SourceSpec, SurfaceProfile, default_room,
                   default_surfaces, sabine_rt60)
from .rt60 import RT60EstimationError, estimate_rt60, schroeder_frequency
from .simulate import SimConfig, simulate_brir
from .tail import synthesize_diffuse_tail
from .wavio import load_brir, save_brir

__all__ = [
    "BinauralRir", "EnergyHistogram", "ImageSet", "ImageSource", "InvalidSceneError",
    "RT60EstimationError", "RoomSpec", "SimConfig", "SourceSpec", "SurfaceProfile",
    "default_room", "default_surfaces", "enumerate_image_sources", "estimate_rt60",
    "image_set", "load_brir", "rain_diffusion", "render_specular_rir", "sabine_rt60",
    "save_brir", "schroeder_frequency", "simulate_brir", "synthesize_diffuse_tail",
]
