"""Python bindings for the TAPS harness core.

The heavy lifting lives in the compiled ``_taps`` module; this package
re-exports its surface.
"""

from taps._taps import (
    ApiCall,
    ApiSchema,
    GenerationTrace,
    InstanceScore,
    SlotTriplet,
    TaggedInstruction,
    TapsError,
    build_prompt,
    calls_from_tags,
    canonicalize_names,
    corrupt,
    least_confidence,
    make_trace,
    margin_at_t,
    parse_calls,
    parse_tagged,
    pearson,
    prompt_template_ids,
    render_call,
    render_tagged,
    score_instance,
    select_threshold,
    sequence_margin,
    strip_tags,
    tag_violations,
    tagging_metrics,
    to_triplets,
    triplets_from_tags,
    validate_call,
    validate_tags,
    win_same_loss,
)

__all__ = [
    "ApiCall",
    "ApiSchema",
    "GenerationTrace",
    "InstanceScore",
    "SlotTriplet",
    "TaggedInstruction",
    "TapsError",
    "build_prompt",
    "calls_from_tags",
    "canonicalize_names",
    "corrupt",
    "least_confidence",
    "make_trace",
    "margin_at_t",
    "parse_calls",
    "parse_tagged",
    "pearson",
    "prompt_template_ids",
    "render_call",
    "render_tagged",
    "score_instance",
    "select_threshold",
    "sequence_margin",
    "strip_tags",
    "tag_violations",
    "tagging_metrics",
    "to_triplets",
    "triplets_from_tags",
    "validate_call",
    "validate_tags",
    "win_same_loss",
]
