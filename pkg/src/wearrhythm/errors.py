"""Exception hierarchy shared by every pipeline stage."""


class PipelineError(Exception):
    """Base class; the CLI turns these into a JSON error payload."""

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


# ingest
class MissingColumn(PipelineError):
    pass


class InfectedWithoutOnset(PipelineError):
    pass


class NoEligibleDay(PipelineError):
    pass


# preprocess
class LengthMismatch(PipelineError):
    pass


class AllMissing(PipelineError):
    pass


class EmptySeries(PipelineError):
    pass


class InvalidSpec(PipelineError):
    pass


class DayRejected(PipelineError):
    pass


# features / rhythms
class EmptyWindow(PipelineError):
    pass


class RankDeficient(PipelineError):
    pass


class InsufficientPoints(PipelineError):
    pass


class SpanTooShort(PipelineError):
    pass


# model
class ShapeMismatch(PipelineError):
    pass


class NonFiniteActivation(PipelineError):
    pass


class SingleClassTraining(PipelineError):
    pass


class DivergedLoss(PipelineError):
    pass


# harness
class SingleClass(PipelineError):
    pass


# cli
class ConfigInvalid(PipelineError):
    pass


class InputMissing(PipelineError):
    pass
