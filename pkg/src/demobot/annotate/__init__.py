"""Chunk-aligned pedagogical annotations: schema, template oracle,
prompt construction, pluggable annotator clients, and filtering."""

from .client import RemoteAnnotator, TemplateAnnotator, get_annotator
from .filtering import FilterReport, filter_annotations
from .oracle import annotate_episode, template_annotate
from .prompts import PromptSpec, build_prompt
from .schema import (SAFETY_NORMAL, SAFETY_STOP, Annotation, parse_annotation,
                     serialize_annotation)

__all__ = [
    "Annotation", "FilterReport", "PromptSpec", "RemoteAnnotator",
    "SAFETY_NORMAL", "SAFETY_STOP", "TemplateAnnotator", "annotate_episode",
    "build_prompt", "filter_annotations", "get_annotator", "parse_annotation",
    "serialize_annotation", "template_annotate",
]
