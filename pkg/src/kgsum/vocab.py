from __future__ import annotations

import json
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
SPECIALS = (PAD, UNK, BOS, EOS)


class Vocab:
    """Generation vocabulary with per-document extension for copied OOV tokens."""

    def __init__(self, tokens: Sequence[str]):
        itos = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        self.itos = list(dict.fromkeys(itos))
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    pad_id, unk_id, bos_id, eos_id = 0, 1, 2, 3

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, self.unk_id)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.id(t) for t in tokens]

    @classmethod
    def build(cls, token_lists: Iterable[Sequence[str]], max_size: int | None = None, min_count: int = 1) -> "Vocab":
        counts = Counter()
        for toks in token_lists:
            counts.update(toks)
        # frequency, then lexicographic, for a deterministic order
        ranked = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
        if max_size is not None:
            ranked = ranked[: max(0, max_size - len(SPECIALS))]
        return cls(ranked)

    def extend(self, source: Sequence[str]) -> tuple[list[int], list[str]]:
        """Extended ids for ``source``: OOV tokens get ``len(vocab) + k``."""
        oovs: list[str] = []
        ext = []
        for tok in source:
            if tok in self.stoi:
                ext.append(self.stoi[tok])
            else:
                if tok not in oovs:
                    oovs.append(tok)
                ext.append(len(self) + oovs.index(tok))
        return ext, oovs

    def target_ids(self, tokens: Sequence[str], oovs: Sequence[str]) -> list[int]:
        out = []
        for tok in tokens:
            if tok in self.stoi:
                out.append(self.stoi[tok])
            elif tok in oovs:
                out.append(len(self) + list(oovs).index(tok))
            else:
                out.append(self.unk_id)
        return out

    def to_tokens(self, ext_ids: Iterable[int], oovs: Sequence[str]) -> list[str]:
        out = []
        for i in ext_ids:
            i = int(i)
            out.append(self.itos[i] if i < len(self) else oovs[i - len(self)])
        return out

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.itos), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))
