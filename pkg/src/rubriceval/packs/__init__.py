"""Built-in rubric pack: six artifact rubrics shipped as package data."""

from importlib import resources

from ..rubric import Rubric, RubricPack, load_rubric

PACK_RUBRIC_IDS = (
    "guide_cane",
    "braille_notetaker",
    "pallanguzhi",
    "mridangam",
    "kasavu_saree",
    "chundan_vallam",
)


def load_builtin_rubric(rubric_id: str) -> Rubric:
    if rubric_id not in PACK_RUBRIC_IDS:
        raise KeyError(
            f"no built-in rubric {rubric_id!r} (have: {', '.join(PACK_RUBRIC_IDS)})"
        )
    text = resources.files(__package__).joinpath(f"{rubric_id}.json").read_text("utf-8")
    return load_rubric(text)


def load_builtin_pack() -> RubricPack:
    return RubricPack(load_builtin_rubric(rid) for rid in PACK_RUBRIC_IDS)
