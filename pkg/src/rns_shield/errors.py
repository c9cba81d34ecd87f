"""Exception hierarchy shared by every layer of rns_shield."""

from __future__ import annotations


class RnsShieldError(Exception):
    """Base class for all errors raised by this package."""


# -- residue number system ---------------------------------------------------

class ModuliError(RnsShieldError, ValueError):
    pass


class NotCoprime(ModuliError):
    def __init__(self, a: int, b: int):
        super().__init__(f"moduli {a} and {b} share a common factor")
        self.pair = (a, b)


class OrderingViolation(ModuliError):
    pass


class ValueOutOfFullRange(RnsShieldError, ValueError):
    pass


class ProjectionOutOfRange(RnsShieldError):
    """Excluding the given base did not land the value in the working range."""

    def __init__(self, index: int, value: int):
        super().__init__(f"projection excluding base {index} gives {value}, outside the working range")
        self.index = index
        self.value = value


class ConfigurationError(RnsShieldError):
    pass


# -- hashing -----------------------------------------------------------------

class UnknownAlgorithm(RnsShieldError, KeyError):
    def __str__(self) -> str:
        return f"unknown hash algorithm id {self.args[0]!r}"


class CellOverflow(RnsShieldError, ValueError):
    pass


class TruncationLoss(RnsShieldError):
    """Unmasking left bits set above the hash sub-code width."""


# -- protection scheme -------------------------------------------------------

class ConfigInvalid(RnsShieldError, ValueError):
    pass


# -- container ---------------------------------------------------------------

class ContainerError(RnsShieldError):
    pass


class BadMagic(ContainerError):
    pass


class UnsupportedVersion(ContainerError):
    pass


class ChecksumMismatch(ContainerError):
    pass


class HeaderInvalid(ContainerError):
    pass


class Truncated(ContainerError):
    def __init__(self, message: str, super_block: int | None = None):
        super().__init__(message)
        self.super_block = super_block


class IoFailure(RnsShieldError, OSError):
    pass


# -- fault harness -----------------------------------------------------------

class RegionEmpty(RnsShieldError):
    pass
