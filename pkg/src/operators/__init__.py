"""Translation operators (zeta, delta, psi, rho, sigma): contracts, reference and external backends"""

from .base import CONTRACTS, OperatorContract, TranslationOperator, contract_for, decode_output
from .external import ExternalOperator, external_operator, serve
from .reference import (
    DelightResult,
    LightingSideChannel,
    ReferencePsi,
    ReferenceRho,
    ReferenceSigma,
    ReferenceZeta,
    delight_delta,
    delight_reference,
    diff_normals_sigma,
    reference_operator,
    spec_albedo_psi,
    spec_normals_rho,
    sr_zeta,
)

__all__ = [
    "CONTRACTS",
    "DelightResult",
    "ExternalOperator",
    "LightingSideChannel",
    "OperatorContract",
    "ReferencePsi",
    "ReferenceRho",
    "ReferenceSigma",
    "ReferenceZeta",
    "TranslationOperator",
    "contract_for",
    "decode_output",
    "delight_delta",
    "delight_reference",
    "diff_normals_sigma",
    "external_operator",
    "reference_operator",
    "serve",
    "spec_albedo_psi",
    "spec_normals_rho",
    "sr_zeta",
]
