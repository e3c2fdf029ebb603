"""Error hierarchy for the pipeline.

``DataError`` covers bad inputs and broken invariants (CLI exit 1),
``BackendError`` covers model, search and fetch backends (CLI exit 2).
"""


class AlignError(Exception):
    """Base class for every error raised by alignapp."""


# ── data ──────────────────────────────────────────────────────────────────────

class DataError(AlignError):
    pass


class MalformedRow(DataError):
    def __init__(self, line, reason=""):
        self.line = line
        self.reason = reason
        super().__init__(f"malformed row at line {line}: {reason}".rstrip(": "))


class BoundsError(DataError):
    def __init__(self, line, reason):
        self.line = line
        super().__init__(f"line {line}: {reason}")


class SchemaError(DataError):
    pass


class InvalidAnswer(DataError):
    def __init__(self, question_id, answer):
        self.question_id = question_id
        self.answer = answer
        super().__init__(f"question {question_id!r}: correct answer {answer!r} is not one of the options")


class DuplicateModality(DataError):
    def __init__(self, student, modality):
        self.student = student
        self.modality = modality
        super().__init__(f"student {student!r}: modality {modality!r} ranked more than once")


class UnknownTopic(DataError):
    def __init__(self, topic):
        self.topic = topic
        super().__init__(f"topic {topic!r} is not in the course topic set")


class InvalidTau(DataError):
    def __init__(self, tau):
        self.tau = tau
        super().__init__(f"mastery threshold must lie in [0, 1], got {tau!r}")


class CountMismatch(DataError):
    pass


class EmptyIntersection(DataError):
    pass


class NoExamData(DataError):
    pass


class StudentMismatch(DataError):
    pass


class EmptyEvidence(DataError):
    pass


class ConflictError(DataError):
    pass


class ConfigError(DataError):
    pass


class IoError(DataError):
    pass


class UnboundPlaceholder(DataError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"template placeholder {{{{{name}}}}} has no binding")


class DatasetInvalid(DataError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"course dataset failed validation with {len(report.violations)} violation(s)")


# ── backends ──────────────────────────────────────────────────────────────────

class BackendError(AlignError):
    pass


class BackendUnavailable(BackendError):
    pass


class NonZeroTemperature(BackendError):
    def __init__(self, temperature):
        self.temperature = temperature
        super().__init__(f"pipeline requests must use temperature 0, got {temperature!r}")


class ReplayMiss(BackendError):
    def __init__(self, digest):
        self.digest = digest
        super().__init__(f"replay store has no entry for request {digest}")


class FixtureMiss(BackendError):
    def __init__(self, query):
        self.query = query
        super().__init__(f"search fixtures have no entry for query {query!r}")


class BrokenLink(BackendError):
    def __init__(self, url, status=None):
        self.url = url
        self.status = status
        super().__init__(f"{url} is not retrievable (status {status})")


class AgentContractError(BackendError):
    """The model answered, but not in the shape its prompt asked for."""


class UnparseableDiagnosis(AgentContractError):
    pass


class UnparseableLabel(AgentContractError):
    pass


class UnparseableVerdict(AgentContractError):
    pass


class MissingSection(AgentContractError):
    pass


class UnusedBindingWarning(UserWarning):
    pass
