"""Validate lttd JSON outputs against the schemas in this directory.

usage: validate.py SCHEMA_DIR name=path[#key] ...
A .jsonl path is validated line by line; #key selects a member of the document.
"""
import json
import pathlib
import sys

import jsonschema
from referencing import Registry, Resource


def load_registry(schema_dir):
    registry = Registry()
    for path in schema_dir.glob("*.schema.json"):
        registry = registry.with_resource(path.name, Resource.from_contents(json.loads(path.read_text())))
    return registry


def documents(target):
    path, _, key = target.partition("#")
    text = pathlib.Path(path).read_text()
    docs = [json.loads(line) for line in text.splitlines() if line.strip()] if path.endswith(".jsonl") else [json.loads(text)]
    return [d[key] for d in docs] if key else docs


def main(argv):
    schema_dir = pathlib.Path(argv[1])
    registry = load_registry(schema_dir)
    failed = 0
    for arg in argv[2:]:
        name, _, target = arg.partition("=")
        schema = json.loads((schema_dir / f"{name}.schema.json").read_text())
        validator = jsonschema.Draft202012Validator(schema, registry=registry)
        for i, doc in enumerate(documents(target)):
            errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.path))
            for e in errors:
                print(f"{target}[{i}] vs {name}: {'/'.join(map(str, e.path))}: {e.message}")
            failed += bool(errors)
    print("schemas:", "FAIL" if failed else "ok")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
