"""Word-level tokenizer over the annotation/instruction lexicon.

Words (including internal hyphens/apostrophes) and punctuation marks are
single tokens; unknown words fall back to per-byte tokens.  Detokenization
re-inserts canonical spacing, so encode∘decode is the identity on every
template-oracle text and task instruction.
"""

import re

PAD, BOS, EOS, NL, WB = "<pad>", "<bos>", "<eos>", "<nl>", "<wb>"
SPECIALS = (PAD, BOS, EOS, NL, WB)

_TOKEN_RE = re.compile(r"\w+(?:['\-]\w+)*|[^\w\s]")

# no space is printed before these, or after an opener
_NO_SPACE_BEFORE = {".", ",", ":", ";", "!", "?", ")", "]", "%"}
_NO_SPACE_AFTER = {"(", "["}


def split_words(text: str):
    """Text -> list of word/punctuation tokens with explicit newline marks."""
    out = []
    for i, line in enumerate(text.split("\n")):
        if i > 0:
            out.append(NL)
        out.extend(_TOKEN_RE.findall(line))
    return out


def join_words(words):
    """Inverse of split_words under canonical spacing."""
    parts = []
    prev = None
    for w in words:
        if w == NL:
            parts.append("\n")
        elif (prev is None or prev == NL or prev in _NO_SPACE_AFTER
              or w in _NO_SPACE_BEFORE):
            parts.append(w)
        else:
            parts.append(" " + w)
        prev = w
    return "".join(parts)


class Tokenizer:
    def __init__(self, words):
        vocab = list(SPECIALS)
        vocab += [f"<0x{b:02X}>" for b in range(256)]
        seen = set(vocab)
        for w in sorted(set(words)):
            if w not in seen:
                vocab.append(w)
                seen.add(w)
        if len(vocab) > 2048:
            raise ValueError(f"vocabulary too large: {len(vocab)}")
        self.vocab = vocab
        self.index = {w: i for i, w in enumerate(vocab)}
        self.pad_id = self.index[PAD]
        self.bos_id = self.index[BOS]
        self.eos_id = self.index[EOS]

    def __len__(self):
        return len(self.vocab)

    def encode(self, text: str, add_special: bool = True):
        ids = []
        for w in split_words(text):
            if w in self.index:
                ids.append(self.index[w])
            else:
                # byte fallback, terminated by a word-break marker so that
                # adjacent fallback words stay separate on decode
                ids.extend(self.index[f"<0x{b:02X}>"] for b in w.encode("utf-8"))
                ids.append(self.index[WB])
        if add_special:
            ids = [self.bos_id] + ids + [self.eos_id]
        return ids

    def decode(self, ids) -> str:
        words = []
        byte_run = []
        for i in ids:
            tok = self.vocab[i]
            if tok in (PAD, BOS):
                continue
            if tok == EOS:
                break
            if tok.startswith("<0x"):
                byte_run.append(int(tok[3:5], 16))
                continue
            if tok == WB:
                if byte_run:
                    words.append(bytes(byte_run).decode("utf-8", errors="replace"))
                    byte_run = []
                continue
            if byte_run:
                words.append(bytes(byte_run).decode("utf-8", errors="replace"))
                byte_run = []
            words.append(tok)
        if byte_run:
            words.append(bytes(byte_run).decode("utf-8", errors="replace"))
        return join_words(words)

    def pad_to(self, ids, length):
        if len(ids) > length:
            raise ValueError(f"sequence of {len(ids)} tokens exceeds max length {length}")
        return ids + [self.pad_id] * (length - len(ids))

    def as_manifest(self):
        return {"vocab": self.vocab}

    @classmethod
    def from_manifest(cls, manifest):
        tok = cls.__new__(cls)
        tok.vocab = list(manifest["vocab"])
        tok.index = {w: i for i, w in enumerate(tok.vocab)}
        tok.pad_id = tok.index[PAD]
        tok.bos_id = tok.index[BOS]
        tok.eos_id = tok.index[EOS]
        return tok


def corpus_texts(registry=None):
    """Every text the template oracle can emit, plus all task instructions."""
    from ..annotate.oracle import template_annotate
    from ..sim.tasks import default_registry
    reg = registry or default_registry()
    texts = []
    for task_id in sorted(reg.tasks):
        task = reg[task_id]
        texts.append(task.instruction)
        for stage in task.stage_list:
            for hand in (False, True):
                for progress in (0.0, 0.99):
                    texts.append(template_annotate(task, stage, hand, progress)
                                 .serialize())
    return texts


def build_tokenizer(registry=None) -> Tokenizer:
    words = []
    for text in corpus_texts(registry):
        words.extend(w for w in split_words(text) if w != NL)
    return Tokenizer(words)
