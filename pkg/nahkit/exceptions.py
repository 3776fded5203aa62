"""Custom exceptions for nahkit.

This module defines the hierarchy of exceptions raised on purpose by the
library. The command-line front end maps them onto exit codes.
"""


class NahError(Exception):
    """Base exception for all nahkit errors.

    All custom exceptions in this package inherit from NahError,
    allowing callers to catch every library error with a single
    except clause if desired.
    """

    pass


class ConfigError(NahError):
    """Configuration file errors.

    Raised when:
    - Config file not found
    - Invalid YAML syntax
    - Invalid config values
    """

    pass


class ValidationError(NahError):
    """Input validation failures.

    Raised when:
    - Dimension or place mismatch between operands
    - Singular matrix where an invertible one is required
    - Linearly dependent vectors where a basis is required
    - Nilpotence, unipotence or centrality preconditions fail
    - Empty input or nonpositive tolerance
    """

    pass


class ModelError(ValidationError):
    """Model file errors.

    Raised when:
    - Model file cannot be read or is not JSON
    - Document does not match the schema of its kind
    - Payload is mathematically invalid (singular basis, non-prime p)
    """

    def __init__(self, path: str, reason: str):
        self.path = path
        self.reason = reason
        super().__init__(f"{path}: {reason}" if path else reason)


class NumberFieldError(ValidationError):
    """Number field errors.

    Raised when:
    - Minimal polynomial is not monic or not irreducible over Q
    - Coefficient list exceeds the unreduced degree bound
    - Inverting the zero element
    - Mixing elements of different fields
    """

    pass


class NotQuasiunipotentError(ValidationError):
    """A loop whose monodromy has an eigenvalue that is not a root of unity."""

    def __init__(self, word: tuple[int, ...]):
        self.word = word
        super().__init__(f"monodromy of loop {list(word)} is not quasiunipotent")


class UnsupportedError(NahError):
    """Requested case is outside what the library decides.

    Raised when:
    - Conjugacy of non-semisimple local monodromies is asked for
    """

    pass


class InvariantViolation(NahError):
    """An exact post-condition check failed.

    Raised when:
    - A computed weight filtration fails its defining axioms
    - A filtration is not stable under the generators of a representation
    """

    pass
