"""Desk-scale CNN training harness that dumps activations, error signals,
inputs and labels per mini-batch in the NPY + manifest.json interchange
layout consumed by the infoflow analysis CLI.
"""

from .config import HarnessConfig
from .datasets import DatasetUnavailable, load_dataset, resolve_dataset_name
from .dump import train_and_dump

__version__ = "0.1.0"
