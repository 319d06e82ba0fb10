"""Synthetic MR spectra: PMM, GAN and DCGAN generators with a Random Forest benchmark."""

from .kernels import BACKEND
from .spectra import Grade, LabeledDataset, PhantomConfig, generate_phantom, load_dataset, save_dataset

__version__ = "0.1.0"

__all__ = ["BACKEND", "Grade", "LabeledDataset", "PhantomConfig", "generate_phantom",
           "load_dataset", "save_dataset"]
