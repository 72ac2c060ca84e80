"""Access to the data files shipped with the package."""

from __future__ import annotations

import os
from functools import lru_cache
from importlib import resources

from .vocab import Vocabulary, load_vocabulary

VOCAB_ENV_VAR = "ACTIONS_VOCAB_PATH"


def fixture_text(relpath: str) -> str:
    return resources.files("actionctl").joinpath("fixtures", relpath).read_text(encoding="utf-8")


def fixture_path(relpath: str) -> str:
    """Filesystem path of a shipped fixture (the package is not zipped)."""
    return str(resources.files("actionctl").joinpath("fixtures", relpath))


@lru_cache(maxsize=1)
def default_vocabulary() -> Vocabulary:
    """The schema.org subset merged with the webapi extension.

    ACTIONS_VOCAB_PATH may point at one or more replacement vocabulary files
    (path separator separated)."""
    override = os.environ.get(VOCAB_ENV_VAR)
    if override:
        texts = []
        for path in override.split(os.pathsep):
            with open(path, encoding="utf-8") as fh:
                texts.append(fh.read())
        return load_vocabulary(*texts)
    return load_vocabulary(
        fixture_text("vocab/schemaorg-subset.json"),
        fixture_text("vocab/webapi-extension.json"),
    )
