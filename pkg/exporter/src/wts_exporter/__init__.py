"""Bridge from image folders and class prompts to WTSEMB1 embedding files."""

from .encoders import ClipEncoder, ToyEncoder, load_encoder
from .export import DEFAULT_TEMPLATE, ExportJob, ExportReport, export, verify, zero_shot_accuracy
from .format import EmbeddingFile, FormatViolation, read_embedding_file, write_embedding_file

__version__ = "0.1.0"

__all__ = [
    "ClipEncoder",
    "DEFAULT_TEMPLATE",
    "EmbeddingFile",
    "ExportJob",
    "ExportReport",
    "FormatViolation",
    "ToyEncoder",
    "export",
    "load_encoder",
    "read_embedding_file",
    "verify",
    "write_embedding_file",
    "zero_shot_accuracy",
]
