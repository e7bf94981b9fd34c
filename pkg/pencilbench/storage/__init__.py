"""Storage Module for pencilbench

Exports tensor/CPD file formats and experiment result writers.
"""

from .formats import CpdDocument, read_cpd_json, read_tns3, write_cpd_json, write_tns3
from .results import (
    RunManifest, condition_script, decompose_script, error_ccdf_script, format_value, kappa_ccdf_script,
    manifest_path, properties_script, read_manifest, sweep_script, write_csv, write_manifest, write_script
)

__all__ = [
    # Formats
    "CpdDocument",
    "read_cpd_json",
    "read_tns3",
    "write_cpd_json",
    "write_tns3",
    # Results
    "RunManifest",
    "format_value",
    "manifest_path",
    "read_manifest",
    "write_csv",
    "write_manifest",
    # Plot scripts
    "condition_script",
    "decompose_script",
    "error_ccdf_script",
    "kappa_ccdf_script",
    "properties_script",
    "sweep_script",
    "write_script",
]
