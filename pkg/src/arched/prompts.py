"""Loader for the versioned prompt templates bundled with the package.

Templates live as plain text resources under ``prompts/`` so they stay
diff-able; each file holds a ``### system`` and a ``### user`` section with
``$placeholder`` substitution fields.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template


@lru_cache(maxsize=None)
def load_prompt(name: str) -> dict[str, Template]:
    """Load a prompt resource (e.g. ``"logs_v1"``) into section templates."""
    text = resources.files("arched").joinpath(f"prompts/{name}.txt").read_text(encoding="utf-8")
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        if line.startswith("### "):
            current = sections.setdefault(line[4:].strip(), [])
        elif current is not None:
            current.append(line)
    return {key: Template("\n".join(lines).strip()) for key, lines in sections.items()}
