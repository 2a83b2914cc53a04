"""Exception hierarchy shared across the package."""


class NatlatError(Exception):
    """Base class for all errors raised by this package."""


class DistributionError(NatlatError, ValueError):
    """Invalid probability table: bad values, bad mass, unknown variables."""


class UnsupportedEvidenceError(DistributionError):
    """Conditioning was requested on evidence with zero probability mass."""


class FormatError(NatlatError, ValueError):
    """A text input (distribution, graph, model, script) failed to parse.

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}" if line is not None else message)


class GraphError(NatlatError, ValueError):
    """Invalid DAG or invalid graph query (cycle, unknown node, overlap)."""


class ModelError(NatlatError, ValueError):
    """Invalid agent model: bad variable partition or role assignment."""


class AgreementError(ModelError):
    """Two agent models disagree on their shared observables.

    ``max_diff`` holds the largest absolute cell discrepancy found.
    """

    def __init__(self, message: str, max_diff: float):
        self.max_diff = max_diff
        super().__init__(f"{message} (max cell discrepancy {max_diff:.3g})")


class RuleInapplicableError(NatlatError, ValueError):
    """A proof rule's precondition does not hold for the given inputs."""


class DerivationError(NatlatError, ValueError):
    """Malformed derivation: unbound names, duplicate names, bad scripts."""
