"""Converter for the upstream serialized citation datasets."""

from .convert import ConversionManifest, ConvertError, DATASET_NAMES, convert

__version__ = "0.1.0"
