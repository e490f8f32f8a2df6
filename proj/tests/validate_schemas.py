"""Run the qnbm binary and validate its JSON outputs against schemas/."""

import json
import pathlib
import subprocess
import sys
import tempfile

from jsonschema import Draft202012Validator
from referencing import Registry, Resource


def main(qnbm, schema_dir):
    schema_dir = pathlib.Path(schema_dir)
    schemas = {p.name.split(".")[0]: json.loads(p.read_text()) for p in schema_dir.glob("*.schema.json")}
    registry = Registry().with_resources(
        (s["$id"], Resource.from_contents(s)) for s in schemas.values()
    )
    with tempfile.TemporaryDirectory() as tmp:
        tmp = pathlib.Path(tmp)
        runs = [
            ("trace", ["train", "--structure", "1,0,2", "--iterations", "10", "--out", str(tmp / "t.json")]),
            ("histogram", ["sample", "--structure", "1,0,2", "--params", str(tmp / "t.json"), "--mode", "ps",
                           "--out", str(tmp / "h.json")]),
            ("stress_report", ["stress", "--structures", "1,0,2;2,0,3", "--trials", "2", "--iterations", "10",
                               "--K", "5", "--out", str(tmp / "r.json")]),
        ]
        failed = False
        for schema, args in runs:
            subprocess.run([qnbm, *args], check=True, stdout=subprocess.DEVNULL)
            doc = json.loads(pathlib.Path(args[-1]).read_text())
            errors = list(Draft202012Validator(schemas[schema], registry=registry).iter_errors(doc))
            for e in errors[:5]:
                print(f"{schema}: {e.json_path}: {e.message}")
            print(f"{schema}: {'ok' if not errors else 'INVALID'}")
            failed |= bool(errors)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1], sys.argv[2]))
