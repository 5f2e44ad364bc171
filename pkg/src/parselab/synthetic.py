"""Synthetic treebank from a small deterministic grammar.

Sentences follow NP VERB NP [ADV] [PP]. Heads and relations are a fixed
function of the POS template: DET and ADJ attach to the next NOUN, the
first NOUN is the verb's nsubj, the second its obj, ADV attaches to the
verb, a PP's ADP attaches to its NOUN, which attaches to the preceding
object noun.
"""

from __future__ import annotations

import random

from .treebank import DepSentence, DepToken

LEXICON = {
    "DET": ["the", "a", "this", "every", "some"],
    "ADJ": ["big", "small", "red", "old", "quick", "quiet", "green", "happy"],
    "NOUN": ["dog", "cat", "bird", "farmer", "child", "river", "house", "tree",
             "teacher", "horse", "garden", "book", "song", "village", "market", "road"],
    "VERB": ["sees", "likes", "finds", "carries", "watches", "follows", "builds", "hears"],
    "ADV": ["today", "slowly", "again", "often"],
    "ADP": ["near", "behind", "with", "under"],
}


def _noun_phrase(rng, with_adj):
    tags = ["DET"] + (["ADJ"] if with_adj else []) + ["NOUN"]
    return tags


def synthetic_sentence(rng: random.Random, language: str = "syn", sent_id: str | None = None) -> DepSentence:
    subj = _noun_phrase(rng, rng.random() < 0.4)
    obj = _noun_phrase(rng, rng.random() < 0.4)
    tags: list[str] = []
    heads: list[int] = []
    rels: list[str] = []

    def add_np(np_tags, noun_head, noun_rel):
        start = len(tags) + 1
        noun_pos = start + len(np_tags) - 1
        for t in np_tags:
            tags.append(t)
            if t == "NOUN":
                heads.append(noun_head)
                rels.append(noun_rel)
            else:
                heads.append(noun_pos)
                rels.append("det" if t == "DET" else "amod")
        return noun_pos

    verb_pos = len(subj) + 1
    add_np(subj, verb_pos, "nsubj")
    tags.append("VERB")
    heads.append(0)
    rels.append("root")
    obj_noun = add_np(obj, verb_pos, "obj")
    if rng.random() < 0.3:
        tags.append("ADV")
        heads.append(verb_pos)
        rels.append("advmod")
    if rng.random() < 0.3:
        pp_np = _noun_phrase(rng, False)
        adp_pos = len(tags) + 1
        tags.append("ADP")
        heads.append(adp_pos + len(pp_np))
        rels.append("case")
        add_np(pp_np, obj_noun, "nmod")
    tokens = tuple(
        DepToken(id=i, form=rng.choice(LEXICON[t]), upos=t, head=h, deprel=r)
        for i, (t, h, r) in enumerate(zip(tags, heads, rels), start=1)
    )
    return DepSentence(tokens, sent_id, language)


def synthetic_treebank(n_sentences: int = 200, seed: int = 0, language: str = "syn") -> list[DepSentence]:
    rng = random.Random(seed)
    return [synthetic_sentence(rng, language, f"{language}-{i + 1}") for i in range(n_sentences)]


def synthetic_vocabulary() -> list[str]:
    return [w for words in LEXICON.values() for w in words]
