#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes fixtures/annotations_predicted.json and fixtures/annotations_truth.json.

Six tool classes of sizes 30, 30, 3, 1, 1, 1. Class a shares one writer/reader
group in both files; class b has a spurious group in the predicted file and a
missed group in the truth file. Everything else touches private paths only.
"""
import json
import pathlib

SIZES = {"a": 30, "b": 30, "c": 3, "d": 1, "e": 1, "f": 1}


def private(name):
    return {"reads": [{"path": f"/private/{name}", "subtree": False}], "writes": []}


def tool(name, cls, annotation):
    return {
        "name": name,
        "description": f"tool {name}",
        "parameters": {"id": {"type": "string", "description": "target", "required": True}},
        "class": cls,
        "annotation": annotation,
    }


def build(predicted):
    tools = []
    for cls, n in SIZES.items():
        for i in range(n):
            name = f"{cls}{i}"
            ann = private(name)
            if cls == "a" and i < 9:
                ann = {"reads": [], "writes": [{"path": "/a/x", "subtree": False}]}
            elif cls == "a" and i < 19:
                ann = {"reads": [{"path": "/a/x", "subtree": False}], "writes": []}
            elif cls == "b" and predicted and i < 3:
                ann = {"reads": [], "writes": [{"path": "/b/{id}", "subtree": False}]}
            elif cls == "b" and predicted and i < 13:
                ann = {"reads": [{"path": "/b/p", "subtree": False}], "writes": []}
            elif cls == "b" and not predicted and 13 <= i < 16:
                ann = {"reads": [], "writes": [{"path": "/b/q", "subtree": True}]}
            elif cls == "b" and not predicted and 16 <= i < 26:
                ann = {"reads": [{"path": "/b/q/items", "subtree": False}], "writes": []}
            tools.append(tool(name, cls, ann))
    return {"tools": tools}


if __name__ == "__main__":
    out = pathlib.Path(__file__).resolve().parent.parent / "fixtures"
    for label, flag in (("predicted", True), ("truth", False)):
        (out / f"annotations_{label}.json").write_text(json.dumps(build(flag), indent=1) + "\n")
