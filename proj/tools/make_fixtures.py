#!/usr/bin/env python3
"""Regenerates the synthetic test fixtures under tests/fixtures.

Output is fully determined by the seeds below; rerunning leaves the tree unchanged.
"""
import json
import random
import sys
from pathlib import Path

SOURCE_WORDS = (
    "the of and to in is that it for on with as this we was are be at by not you from have or one had "
    "but what all were when there can an your which their said if do will each about how up out them "
    "then she many some so these would other into has more her two like him see time could no make than "
    "first been its who now people my made over did down only way find use may water long little very"
).split()

TARGET_WORDS = (
    "der die das und zu in ist dass es für auf mit als dies wir war sind sein an von nicht du aus haben "
    "oder ein hatte aber was alle waren wenn dort kann einen dein welche ihre sagte ob tun wird jeder über "
    "wie hoch heraus sie dann viele einige so diese würde andere hinein hat mehr zwei wie ihn sehen zeit "
    "könnte kein machen als zuerst gewesen sein wer jetzt leute mein gemacht vorbei tat unten nur weg finden"
).split()

ZH_CHARS = "我们今天要讨论的是一个非常重要的问题这个世界正在快速变化科学技术让生活更加美好未来属于年轻人学习永远不会太晚"


def sentence(rng, words, lo, hi):
    return [rng.choice(words) for _ in range(rng.randint(lo, hi))]


def perturb(rng, tokens, rate, words):
    out = []
    for t in tokens:
        r = rng.random()
        if r < rate / 3:
            continue  # deletion
        if r < 2 * rate / 3:
            out.append(rng.choice(words))  # substitution
            continue
        out.append(t)
        if r < rate:
            out.append(rng.choice(words))  # insertion
    return out or [rng.choice(words)]


def rechunk(rng, tokens, lo, hi, avoid):
    """Splits tokens into lines of lo..hi tokens; retries until the count differs from `avoid`."""
    while True:
        lines, i = [], 0
        while i < len(tokens):
            n = rng.randint(lo, hi)
            lines.append(tokens[i:i + n])
            i += n
        if len(lines) != avoid:
            return lines


def write_lines(path, lines, header=None):
    text = "".join(line + "\n" for line in lines)
    if header:
        text = header + "\n" + text
    path.write_text(text, encoding="utf-8")


def write_manifest(path, condition, documents):
    path.write_text(json.dumps({"condition": condition, "documents": documents}, indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")


def mini(root):
    rng = random.Random(20220527)
    out = root / "mini"
    out.mkdir(parents=True, exist_ok=True)
    systems = {"sys_a": 0.05, "sys_b": 0.2, "sys_c": 0.4}
    docs = []
    for doc_id, count in (("ted_1001", 30), ("ted_1002", 20)):
        src = [sentence(rng, SOURCE_WORDS, 5, 14) for _ in range(count)]
        new = [sentence(rng, TARGET_WORDS, 5, 14) for _ in range(count)]
        original = [perturb(rng, s, 0.15, TARGET_WORDS) for s in new]
        write_lines(out / f"{doc_id}.source.txt", [" ".join(s) for s in src])
        write_lines(out / f"{doc_id}.ref.new.txt", [" ".join(s) for s in new])
        write_lines(out / f"{doc_id}.ref.original.txt", [" ".join(s) for s in original])
        entry = {
            "doc_id": doc_id,
            "source": f"{doc_id}.source.txt",
            "references": {"new": f"{doc_id}.ref.new.txt", "original": f"{doc_id}.ref.original.txt"},
            "systems": {},
        }
        for sys_id, rate in systems.items():
            tokens = [t for s in new for t in perturb(rng, s, rate, TARGET_WORDS)]
            lines = rechunk(rng, tokens, 4, 16, count)
            write_lines(out / f"{doc_id}.hyp.{sys_id}.txt", [" ".join(l) for l in lines])
            entry["systems"][sys_id] = f"{doc_id}.hyp.{sys_id}.txt"
        docs.append(entry)
    write_manifest(out / "manifest.json", {"task": "offline", "langs": "en-de", "domain": "TED"}, docs)
    return docs


def zh(root):
    rng = random.Random(7)
    out = root / "zh"
    out.mkdir(parents=True, exist_ok=True)
    count = 8
    src = [sentence(rng, SOURCE_WORDS, 4, 10) for _ in range(count)]
    ref = ["".join(rng.choice(ZH_CHARS) for _ in range(rng.randint(6, 14))) for _ in range(count)]
    hyp = []
    for r in ref:
        chars = list(r)
        for i in range(len(chars)):
            if rng.random() < 0.1:
                chars[i] = rng.choice(ZH_CHARS)
        hyp.append("".join(chars))
    write_lines(out / "talk_zh.source.txt", [" ".join(s) for s in src])
    write_lines(out / "talk_zh.ref.new.txt", ref)
    # One unsegmented blob, as an ASR-based system would emit it.
    write_lines(out / "talk_zh.hyp.sys_zh.txt", ["".join(hyp)])
    write_manifest(out / "manifest.json", {"task": "simultaneous", "langs": "en-zh", "domain": "TED"}, [{
        "doc_id": "talk_zh",
        "source": "talk_zh.source.txt",
        "references": {"new": "talk_zh.ref.new.txt"},
        "systems": {"sys_zh": "talk_zh.hyp.sys_zh.txt"},
    }])


def bad(root, docs):
    cond = {"task": "offline", "langs": "en-de", "domain": "TED"}
    mini_rel = "../mini/"

    def relocate(entry):
        e = json.loads(json.dumps(entry))
        e["source"] = mini_rel + e["source"]
        e["references"] = {k: mini_rel + v for k, v in e["references"].items()}
        e["systems"] = {k: mini_rel + v for k, v in e["systems"].items()}
        return e

    d = root / "bad_duplicate_doc"
    d.mkdir(parents=True, exist_ok=True)
    write_manifest(d / "manifest.json", cond, [relocate(docs[0]), relocate(docs[1]), relocate(docs[0])])

    d = root / "bad_missing_refset"
    d.mkdir(parents=True, exist_ok=True)
    second = relocate(docs[1])
    del second["references"]["original"]
    write_manifest(d / "manifest.json", cond, [relocate(docs[0]), second])

    d = root / "bad_line_count"
    d.mkdir(parents=True, exist_ok=True)
    lines = (root / "mini" / "ted_1002.ref.new.txt").read_text(encoding="utf-8").splitlines()
    write_lines(d / "short.ref.txt", lines[:-1])
    broken = relocate(docs[1])
    broken["references"]["new"] = "short.ref.txt"
    write_manifest(d / "manifest.json", cond, [relocate(docs[0]), broken])


def score_tables(root):
    """System-level DA and chrF tables for several conditions, for correlation tests."""
    rng = random.Random(4242)
    out = root / "scores"
    out.mkdir(parents=True, exist_ok=True)
    header = "method\ttask\tlang_pair\tdomain\treference_set\tsystem_id\tsegment_id\tscore\n"
    human, metric = [header], [header]
    conditions = [("offline", "en-de", "TED", 6), ("offline", "en-de", "ACL", 6), ("simultaneous", "en-de", "TED", 5),
                  ("simultaneous", "en-zh", "TED", 2)]
    for task, langs, domain, n in conditions:
        for i in range(n):
            sys_id = f"team{i + 1}"
            quality = rng.uniform(0.3, 0.9)
            da = round(100 * quality + rng.gauss(0, 4), 2)
            chrf = round(30 + 40 * quality + rng.gauss(0, 2), 2)
            human.append(f"da\t{task}\t{langs}\t{domain}\t\t{sys_id}\t\t{da}\n")
            metric.append(f"chrf\t{task}\t{langs}\t{domain}\tnew\t{sys_id}\t\t{chrf}\n")
    (out / "human_da.tsv").write_text("".join(human), encoding="utf-8")
    (out / "metric_chrf.tsv").write_text("".join(metric), encoding="utf-8")


def main():
    root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "fixtures"
    docs = mini(root)
    zh(root)
    bad(root, docs)
    score_tables(root)


if __name__ == "__main__":
    main()
