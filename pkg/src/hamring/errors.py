"""Reasons a run of the cycle construction can stop short of success."""

from __future__ import annotations

import enum


class FailureCause(str, enum.Enum):
    NO_RESPONDER = "NoResponder"
    CYCLE_NOT_CLOSED = "CycleNotClosed"
    DIAMETER_EXCEEDED = "DiameterExceeded"
    GAP_EXHAUSTED = "GapExhausted"
    INCOMPLETE = "Incomplete"


class AlgorithmHalt(Exception):
    """The distributed algorithm stopped; `cause` says why."""

    cause: FailureCause

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.cause.value)
        self.detail = detail


class NoResponder(AlgorithmHalt):
    cause = FailureCause.NO_RESPONDER


class CycleNotClosed(AlgorithmHalt):
    cause = FailureCause.CYCLE_NOT_CLOSED


class DiameterExceeded(AlgorithmHalt):
    cause = FailureCause.DIAMETER_EXCEEDED


class GapExhausted(AlgorithmHalt):
    cause = FailureCause.GAP_EXHAUSTED
