"""Register taxonomy: 8 main registers plus their sub-registers.

The canonical main-register order is fixed; every label vector, report
column, and confusion matrix in this package uses it.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from functools import lru_cache

MAIN_ORDER = ("NA", "IN", "OP", "ID", "HI", "IP", "LY", "SP")


class TaxonomyError(ValueError):
    """Raised for unknown register codes or malformed taxonomy data."""


@dataclass(frozen=True)
class RegisterCode:
    code: str
    display_name: str


@dataclass(frozen=True)
class Taxonomy:
    """Main registers in canonical order plus the sub-to-main mapping."""

    mains: tuple[RegisterCode, ...]
    subs: dict[str, str] = field(repr=False)  # sub code -> main code
    display: dict[str, str] = field(repr=False)

    def __post_init__(self):
        main_codes = [m.code for m in self.mains]
        if tuple(main_codes) != MAIN_ORDER:
            raise TaxonomyError(
                f"main registers must be exactly {MAIN_ORDER} in order, got {main_codes}"
            )
        for sub, main in self.subs.items():
            if main not in main_codes:
                raise TaxonomyError(f"sub-register {sub!r} maps to unknown main {main!r}")

    @property
    def label_order(self) -> tuple[str, ...]:
        return MAIN_ORDER

    def is_main(self, code: str) -> bool:
        return code in MAIN_ORDER

    def is_valid(self, code: str) -> bool:
        return code in MAIN_ORDER or code in self.subs

    def main_of(self, code: str) -> str:
        """Main register of any valid code (identity for main codes)."""
        if code in MAIN_ORDER:
            return code
        try:
            return self.subs[code]
        except KeyError:
            raise TaxonomyError(f"unknown register code {code!r}") from None

    def index(self, main_code: str) -> int:
        try:
            return MAIN_ORDER.index(main_code)
        except ValueError:
            raise TaxonomyError(f"not a main register code: {main_code!r}") from None

    def sort_key(self, code: str):
        """Stable ordering: by main-register position, mains before their subs."""
        main = self.main_of(code)
        return (self.index(main), code != main, code)


def parse_taxonomy_lines(lines) -> Taxonomy:
    mains: list[RegisterCode] = []
    subs: dict[str, str] = {}
    display: dict[str, str] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise TaxonomyError(f"taxonomy line {lineno}: expected 3 tab-separated fields")
        code, main, name = parts
        if code in display:
            raise TaxonomyError(f"taxonomy line {lineno}: duplicate code {code!r}")
        display[code] = name
        if code == main:
            mains.append(RegisterCode(code, name))
        else:
            subs[code] = main
    return Taxonomy(mains=tuple(mains), subs=subs, display=display)


@lru_cache(maxsize=1)
def default_taxonomy() -> Taxonomy:
    """The packaged register taxonomy (8 mains, ~30 sub-registers)."""
    ref = importlib.resources.files("regcore").joinpath("data/taxonomy.tsv")
    with ref.open("r", encoding="utf-8") as fh:
        return parse_taxonomy_lines(fh)
