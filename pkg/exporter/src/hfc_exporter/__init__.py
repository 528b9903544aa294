from .export import ExportResult, export, export_files

__all__ = ["ExportResult", "export", "export_files"]
__version__ = "0.1.0"
