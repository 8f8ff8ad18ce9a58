"""Regenerate the bundled emoji alias table and English wordlist.

Needs the ``emoji`` and ``english-words`` distributions importable (they are
build-time inputs only; the package reads the generated files)::

    pip install emoji==2.12.1 english-words==2.0.2
    python scripts/build_data_tables.py
"""
import gzip
import re
import unicodedata
from pathlib import Path

import emoji
from english_words import get_english_words_set

DATA = Path(__file__).resolve().parents[1] / "src" / "vaxnet" / "data"


DIGITS = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"]
SYMBOLS = {"#": "_hash_", "*": "_asterisk_", "&": "_and_"}


def sanitize(alias: str) -> str:
    body = alias.strip(":")
    body = re.sub(r"\d", lambda m: f"_{DIGITS[int(m.group())]}_", body)
    body = "".join(SYMBOLS.get(ch, ch) for ch in body)
    body = unicodedata.normalize("NFKD", body)
    body = body.encode("ascii", "ignore").decode().lower()
    body = re.sub(r"[^a-z]+", "_", body).strip("_")
    return f":{body}:"


def main() -> None:
    rows = []
    for seq, info in emoji.EMOJI_DATA.items():
        alias = sanitize(info["en"])
        if alias == "::":
            continue
        codes = " ".join(f"{ord(ch):04X}" for ch in seq)
        rows.append((codes, alias))
    rows.sort()
    with open(DATA / "emoji_aliases.tsv", "w", encoding="utf-8") as fh:
        fh.write(f"# generated from emoji {emoji.__version__}; codepoints<TAB>alias\n")
        for codes, alias in rows:
            fh.write(f"{codes}\t{alias}\n")

    words = sorted(w for w in get_english_words_set(["gcide"], lower=True, alpha=True) if w.isalpha())
    with gzip.GzipFile(DATA / "english_words.txt.gz", "wb", mtime=0) as fh:
        fh.write(("\n".join(words) + "\n").encode("ascii"))
    print(len(rows), "emoji,", len(words), "words")


if __name__ == "__main__":
    main()
