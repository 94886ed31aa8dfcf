"""Simulator for latent quantum theories and a numerical checker of their composition axioms."""

from .qmath import KrausMap
from .theory import ElementaryLabel, LatentConfig, SystemString, compose_systems, qmap
from .states_effects import LqtEffect, LqtState, Povm, compose_effects, compose_povms, compose_states, pair
from .transforms import LatentTransformation, NoisyPermutation, par_compose, realize, seq_compose

__version__ = "0.1.0"
