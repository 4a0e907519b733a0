"""Python access to the mobench harness."""

from ._mobench import (
    MobenchError,
    canonical_action,
    classify_gesture,
    compress_xml,
    export_session,
    report,
    run_suite,
    validate_suite,
)

__all__ = [
    "MobenchError",
    "canonical_action",
    "classify_gesture",
    "compress_xml",
    "export_session",
    "report",
    "run_suite",
    "validate_suite",
]
