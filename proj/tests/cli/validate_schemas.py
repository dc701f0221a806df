"""Run every adkit subcommand on synthetic fixtures and validate stdout
against the shipped JSON schemas.

usage: validate_schemas.py ADKIT_EXE SCHEMA_DIR
"""

import json
import struct
import subprocess
import sys
import tempfile
from pathlib import Path

import jsonschema


def run(exe, *args):
    proc = subprocess.run([exe, *map(str, args)], capture_output=True, text=True)
    if proc.returncode != 0:
        raise SystemExit(f"{' '.join(map(str, args))} exited {proc.returncode}: {proc.stderr}")
    return [json.loads(line) for line in proc.stdout.splitlines() if line.strip()]


def write_identity_dict(path, dim):
    rows = b"".join(
        struct.pack(f"<{dim}f", *[1.0 if c == r else 0.0 for c in range(dim)]) for r in range(dim)
    )
    path.write_bytes(b"ADSK" + struct.pack("<IIQ", 1, dim, dim) + rows)


def main():
    exe, schema_dir = sys.argv[1], Path(sys.argv[2])
    schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    for s in schemas.values():
        jsonschema.Draft202012Validator.check_schema(s)

    checked = 0

    def check(kind, docs):
        nonlocal checked
        assert docs, f"{kind}: no output"
        for d in docs:
            jsonschema.validate(d, schemas[kind], cls=jsonschema.Draft202012Validator)
            checked += 1

    with tempfile.TemporaryDirectory() as tmp:
        t = Path(tmp)
        check("synth", run(exe, "synth", "kb", "--out", t / "kb"))
        check("synth", run(exe, "synth", "defect", "--out", t / "fx"))
        check("ingest", run(exe, "ingest", "--manifest", t / "kb/manifest.jsonl",
                            "--embeddings", t / "kb/embeddings.adsk", "--out", t / "index"))
        for method in ("topk", "kde"):
            check("retrieve", run(exe, "retrieve", "--index", t / "index",
                                  "--key", t / "kb/query.adsk", "--method", method))
        write_identity_dict(t / "dict.adsk", 64)
        check("score", run(exe, "score", "--patches", t / "fx/patches.adsk", "--pos", t / "fx/pos.adsk",
                           "--neg", t / "fx/neg.adsk", "--out-map", t / "m.pgm"))
        check("score", run(exe, "score", "--patches", t / "fx/patches.adsk", "--pos", t / "fx/pos.adsk",
                           "--neg", t / "fx/neg.adsk", "--hsp-stages", "2", "--hsp-lambda", "0.01",
                           "--hsp-dict", t / "dict.adsk", "--diagnostics", "--aggregator", "max"))
        (t / "s.jsonl").write_text('{"id":"a","score":0.2,"label":0}\n{"id":"b","score":0.7,"label":1}\n')
        check("eval", run(exe, "eval", "--scores", t / "s.jsonl"))
        check("eval", run(exe, "eval", "--map", t / "m.pgm", "--mask", t / "fx/mask.pgm"))
        for stage in ("gmm", "retrieve", "score", "hsp"):
            check("bench", run(exe, "bench", "--stage", stage, "--repeats", "2"))

    print(f"validated {checked} documents against {len(schemas)} schemas")


if __name__ == "__main__":
    main()
