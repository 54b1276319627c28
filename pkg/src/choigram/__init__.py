"""Choi-operator characteristic functions, Gram-matrix CP tests and CP-divisibility scans."""

from .channels import (
    ChoiOperator,
    KrausChannel,
    Superoperator,
    choi_from_superop,
    is_completely_positive,
    kraus_to_superop,
    normalize_choi,
    superop_from_choi,
)
from .charfunc import bochner_choi_check, gram_matrix, pauli_basis, weyl_basis
from .dynamics import ModelKind, RateProfile, ScanGrid, cp_divisibility_scan

__version__ = "0.1.0"

__all__ = [
    "ChoiOperator",
    "KrausChannel",
    "ModelKind",
    "RateProfile",
    "ScanGrid",
    "Superoperator",
    "bochner_choi_check",
    "choi_from_superop",
    "cp_divisibility_scan",
    "gram_matrix",
    "is_completely_positive",
    "kraus_to_superop",
    "normalize_choi",
    "pauli_basis",
    "superop_from_choi",
    "weyl_basis",
]
