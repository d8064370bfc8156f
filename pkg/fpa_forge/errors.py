"""Exception hierarchy shared by every fpa_forge module."""

from __future__ import annotations


class ForgeError(Exception):
    """Root of all errors raised by fpa_forge."""


# mqtt-codec


class CodecError(ForgeError):
    pass


class RangeError(CodecError, ValueError):
    pass


class MalformedLength(CodecError):
    pass


class ProtocolViolation(CodecError):
    pass


class UnsupportedQoS(CodecError):
    pass


class EncodeError(CodecError):
    pass


class Incomplete(CodecError):
    pass


class UnknownType(CodecError):
    pass


class TopicError(CodecError):
    pass


class WildcardInTopic(TopicError):
    pass


class LeadingDollar(TopicError):
    pass


class TooLong(TopicError):
    pass


class Empty(TopicError):
    pass


# tcp-encap


class EncapError(ForgeError):
    pass


class MssExceeded(EncapError):
    pass


class NotEstablished(EncapError):
    pass


# capture-io


class CaptureError(ForgeError):
    pass


class BadMagic(CaptureError):
    pass


class TruncatedRecord(CaptureError):
    def __init__(self, index: int, message: str = "") -> None:
        self.index = index
        super().__init__(message or f"pcap record {index} is truncated")


# craft-engine


class CraftError(ForgeError):
    pass


class EmptyPool(CraftError):
    pass


class BudgetExceeded(CraftError):
    pass


class AclViolation(CraftError):
    pass


# soc-sim


class SimulationError(ForgeError):
    pass


class Unstable(SimulationError):
    pass


class ConfigError(SimulationError):
    pass


# stats-suite


class MetricError(ForgeError):
    pass


class ZeroVector(MetricError):
    pass


class ZeroVariance(MetricError):
    pass


class DimMismatch(MetricError, ValueError):
    pass


class SingularCovariance(MetricError):
    pass


class DegenerateSamples(MetricError):
    pass


# surrogate-nids


class ModelError(ForgeError):
    pass


class DegenerateLabels(ModelError):
    pass


# live mode


class LiveError(ForgeError):
    pass


class ConnectRefused(LiveError):
    pass


class ConnackNonZero(LiveError):
    def __init__(self, rc: int) -> None:
        self.rc = rc
        super().__init__(f"broker answered CONNACK with return code 0x{rc:02x}")


class PubackTimeout(LiveError):
    def __init__(self, msgid: int) -> None:
        self.msgid = msgid
        super().__init__(f"no PUBACK received for packet identifier {msgid}")


class TlsPortRejected(LiveError):
    pass
