from typing import Optional


class MetaDecompError(Exception):
    """
    Base error. Carries a detail message and the CLI exit code it maps to,
    the same way an HTTPException carries its status code.
    """
    exit_code = 2
    kind = "error"

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail

    def to_report(self) -> dict:
        return {"error": self.kind, "detail": self.detail}


class InvalidArgumentError(MetaDecompError):
    kind = "invalid-argument"


class ParseError(MetaDecompError):
    kind = "parse-error"

    def __init__(self, detail: str, source: Optional[str] = None,
                 line: Optional[int] = None, field: Optional[str] = None):
        context = []
        if source:
            context.append(source)
        if line is not None:
            context.append(f"line {line}")
        if field:
            context.append(f"field {field}")
        super().__init__(f"{': '.join(context)}: {detail}" if context else detail)
        self.source = source
        self.line = line
        self.field = field

    def to_report(self) -> dict:
        report = super().to_report()
        if self.line is not None:
            report["line"] = self.line
        if self.field:
            report["field"] = self.field
        return report


class NotAcyclicError(MetaDecompError):
    kind = "not-acyclic"


class DisconnectedError(MetaDecompError):
    kind = "disconnected"


class WidthOverflowError(MetaDecompError):
    kind = "width-overflow"


class UnknownCardinalityError(MetaDecompError):
    kind = "unknown-cardinality"


class SchemaError(MetaDecompError):
    kind = "schema-error"


class InternalInvariantError(MetaDecompError):
    kind = "internal-invariant"


class CapExceededError(MetaDecompError):
    exit_code = 3
    kind = "cap-exceeded"


class FanoutLimitError(CapExceededError):
    """Raised by the exact local DP when a hub has too many satellites."""
    kind = "fanout-limit"
