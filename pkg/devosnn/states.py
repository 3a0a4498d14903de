"""Epoch-loop phases, transition table and ablation modes."""

from __future__ import annotations

from enum import Enum, auto


class Phase(Enum):
    TRAIN = auto()
    CONSTRAIN = auto()
    PRUNE = auto()
    REGENERATE = auto()
    EVALUATE = auto()
    RECORD = auto()
    COMPLETED = auto()
    ABORTED = auto()


class Event(Enum):
    DONE = auto()
    SKIPPED = auto()
    NEXT_EPOCH = auto()
    FINISHED = auto()
    ERROR = auto()


# (current_phase, event) -> next_phase
TRANSITIONS: dict[tuple[Phase, Event], Phase] = {
    (Phase.TRAIN, Event.DONE): Phase.CONSTRAIN,
    (Phase.CONSTRAIN, Event.DONE): Phase.PRUNE,
    (Phase.CONSTRAIN, Event.SKIPPED): Phase.PRUNE,
    (Phase.PRUNE, Event.DONE): Phase.REGENERATE,
    (Phase.PRUNE, Event.SKIPPED): Phase.REGENERATE,
    (Phase.REGENERATE, Event.DONE): Phase.EVALUATE,
    (Phase.REGENERATE, Event.SKIPPED): Phase.EVALUATE,
    (Phase.EVALUATE, Event.DONE): Phase.RECORD,
    (Phase.RECORD, Event.NEXT_EPOCH): Phase.TRAIN,
    (Phase.RECORD, Event.FINISHED): Phase.COMPLETED,
}

for _phase in (Phase.TRAIN, Phase.CONSTRAIN, Phase.PRUNE, Phase.REGENERATE, Phase.EVALUATE, Phase.RECORD):
    TRANSITIONS[(_phase, Event.ERROR)] = Phase.ABORTED

TERMINAL = frozenset({Phase.COMPLETED, Phase.ABORTED})


def transition(current: Phase, event: Event) -> Phase:
    """Return the next phase for a given (phase, event) pair.

    Raises ValueError if the transition is not allowed.
    """
    key = (current, event)
    if key not in TRANSITIONS:
        raise ValueError(f"Invalid transition: {current.name} + {event.name}")
    return TRANSITIONS[key]


class Mechanism(Enum):
    CONSTRAINT = "constraint"
    PRUNING = "pruning"
    REGENERATION = "regeneration"


class AblationMode(Enum):
    BASELINE = "baseline"
    CONSTRAINT_ONLY = "constraint_only"
    NO_REGENERATION = "no_regeneration"
    FULL = "full"

    @property
    def mechanisms(self) -> frozenset[Mechanism]:
        return MODE_MECHANISMS[self]

    def enables(self, mechanism: Mechanism) -> bool:
        return mechanism in MODE_MECHANISMS[self]


MODE_MECHANISMS: dict[AblationMode, frozenset[Mechanism]] = {
    AblationMode.BASELINE: frozenset(),
    AblationMode.CONSTRAINT_ONLY: frozenset({Mechanism.CONSTRAINT}),
    AblationMode.NO_REGENERATION: frozenset({Mechanism.CONSTRAINT, Mechanism.PRUNING}),
    AblationMode.FULL: frozenset({Mechanism.CONSTRAINT, Mechanism.PRUNING, Mechanism.REGENERATION}),
}


def parse_mode(text: str | AblationMode) -> AblationMode:
    if isinstance(text, AblationMode):
        return text
    try:
        return AblationMode(str(text).strip().lower().replace("-", "_"))
    except ValueError:
        names = ", ".join(m.value for m in AblationMode)
        raise ValueError(f"unknown mode {text!r} (expected one of: {names})") from None
