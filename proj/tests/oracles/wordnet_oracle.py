#!/usr/bin/env python3
"""Independent WordNet walker used to derive and freeze test expectations.

Deliberately written from the raw file format without sharing anything with
the C++ parser. Subcommands:

  count DIR                 number of synset records in DIR/data.noun
  classify DIR WORD...      morphy + first-sense / any-sense classification
  closure DIR WORD          hypernym closure lemmas of WORD's first sense
  mini DIR OUT WORD...      write a verbatim subset database covering WORDs
"""
import os
import sys

SUFFIX_RULES = [("ses", "s"), ("xes", "x"), ("zes", "z"), ("ches", "ch"),
                ("shes", "sh"), ("men", "man"), ("ies", "y"), ("s", "")]


def read_lines(path):
    with open(path, "rb") as f:
        raw = f.read().decode("utf-8")
    return [l.rstrip("\r\n") for l in raw.split("\n") if l.rstrip("\r\n")]


class WordNet:
    def __init__(self, root):
        self.root = root
        self.index = {}
        self.index_lines = {}
        for line in read_lines(os.path.join(root, "index.noun")):
            if line.startswith("  "):
                continue
            f = line.split()
            lemma = f[0]
            synset_cnt = int(f[2])
            self.index[lemma] = [int(x) for x in f[-synset_cnt:]]
            self.index_lines[lemma] = line
        self.data = {}
        self.data_lines = {}
        self.lemmas = {}
        for line in read_lines(os.path.join(root, "data.noun")):
            if line.startswith("  "):
                continue
            head = line.split("|")[0].split()
            off = int(head[0])
            wcnt = int(head[3], 16)
            words = [head[4 + 2 * i].lower() for i in range(wcnt)]
            pos = 4 + 2 * wcnt
            pcnt = int(head[pos])
            hyp = []
            for k in range(pcnt):
                sym, target, tpos = head[pos + 1 + 4 * k: pos + 4 + 4 * k]
                if sym in ("@", "@i") and tpos == "n":
                    hyp.append(int(target))
            self.data[off] = hyp
            self.lemmas[off] = words
            self.data_lines[off] = line
        self.exc = {}
        self.exc_lines = {}
        for line in read_lines(os.path.join(root, "noun.exc")):
            f = line.split()
            self.exc[f[0]] = f[1:]
            self.exc_lines[f[0]] = line
        self.person = self.index["person"][0]
        self.animal = self.index["animal"][0]

    def morphy(self, word):
        w = word.lower().replace(" ", "_")
        out = []
        for b in self.exc.get(w, []):
            if b in self.index and b not in out:
                out.append(b)
        if w in self.index and w not in out:
            out.append(w)
        for suf, rep in SUFFIX_RULES:
            if w.endswith(suf):
                cand = w[: len(w) - len(suf)] + rep
                if cand and cand in self.index and cand not in out:
                    out.append(cand)
        return out

    def closure(self, off):
        seen = set()
        stack = list(self.data[off])
        while stack:
            o = stack.pop()
            if o in seen:
                continue
            seen.add(o)
            stack.extend(self.data[o])
        return seen

    def kind_of_sense(self, off):
        c = self.closure(off) | {off}
        if self.person in c:
            return "Person"
        if self.animal in c:
            return "Animal"
        return None

    def classify(self, word, any_sense=False):
        bases = self.morphy(word)
        if not bases:
            return "NotInLexicon"
        senses = self.index[bases[0]]
        if not any_sense:
            return self.kind_of_sense(senses[0]) or "NotACharacter"
        for s in senses:
            k = self.kind_of_sense(s)
            if k:
                return k
        return "NotACharacter"


def write_mini(wn, out, words):
    lemmas = set()
    for w in words:
        lw = w.lower()
        if lw in wn.exc:
            lemmas.add(lw)
        for b in wn.morphy(w):
            lemmas.add(b)
        if lw in wn.index:
            lemmas.add(lw)
    lemmas |= {"person", "animal"}
    offsets = set()
    for l in lemmas:
        for s in wn.index.get(l, []):
            offsets.add(s)
            offsets |= wn.closure(s)
    os.makedirs(out, exist_ok=True)
    header = [l for l in read_lines(os.path.join(wn.root, "data.noun"))
              if l.startswith("  ")]
    with open(os.path.join(out, "index.noun"), "w", newline="\n") as f:
        for h in header:
            f.write(h.rstrip() + "\n")
        for l in sorted(l for l in lemmas if l in wn.index):
            f.write(wn.index_lines[l].rstrip() + "  \n")
    with open(os.path.join(out, "data.noun"), "w", newline="\n") as f:
        for h in header:
            f.write(h.rstrip() + "\n")
        for o in sorted(offsets):
            f.write(wn.data_lines[o].rstrip() + "  \n")
    with open(os.path.join(out, "noun.exc"), "w", newline="\n") as f:
        for l in sorted(l for l in lemmas | {w.lower() for w in words}
                        if l in wn.exc_lines):
            f.write(wn.exc_lines[l].rstrip() + "\n")
    print(f"{len(lemmas)} lemmas, {len(offsets)} synsets")


def main(argv):
    cmd, root = argv[1], argv[2]
    if cmd == "count":
        n = 0
        with open(os.path.join(root, "data.noun"), "rb") as f:
            for line in f:
                if line.strip() and not line.startswith(b"  "):
                    n += 1
        print(n)
        return
    wn = WordNet(root)
    if cmd == "classify":
        for w in argv[3:]:
            print(w, wn.morphy(w), wn.classify(w), wn.classify(w, True))
    elif cmd == "closure":
        off = wn.index[wn.morphy(argv[3])[0]][0]
        print(off, sorted(wn.lemmas[o][0] for o in wn.closure(off)))
    elif cmd == "mini":
        write_mini(wn, argv[3], argv[4:])


if __name__ == "__main__":
    main(sys.argv)
