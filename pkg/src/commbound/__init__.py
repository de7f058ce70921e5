"""Lower bounds on the communication complexity of two-party boxes."""

__version__ = "0.1.0"

from .cbox import CBox, Coupling, Prior, product_coupling, validate_cbox  # noqa: E402
from .dual import Certificate, DualPoint, check_certificate, maximize_dual  # noqa: E402
from .primal import minimize_mutual_info, outer_maximize_prior  # noqa: E402

__all__ = [
    "CBox",
    "Certificate",
    "Coupling",
    "DualPoint",
    "Prior",
    "check_certificate",
    "maximize_dual",
    "minimize_mutual_info",
    "outer_maximize_prior",
    "product_coupling",
    "validate_cbox",
]
