"""
Output writers

A run's files are collected in an OutputSet. Commit stages every file as a
temporary sibling first and only then renames them all into place, so a
failed run never leaves a mix of new and earlier outputs behind.
"""

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from typing import Dict, Iterable, List, Optional, Sequence

from switchcast import __version__

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def render_csv(header: Sequence[str], records: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(records)
    return buffer.getvalue()


def sha256_file(path: Optional[str]) -> Optional[str]:
    """Hex digest of a file's contents, None when there is no input"""
    if not path:
        return None
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(run_config: dict, outputs: Sequence[str]) -> dict:
    """Flat manifest: the config echo plus version, input hash and outputs"""
    manifest = dict(run_config)
    manifest["version"] = __version__
    manifest["input_sha256"] = sha256_file(run_config.get("input"))
    manifest["outputs"] = [os.path.basename(item) for item in outputs]
    return manifest


def stage_text(directory: str, text: str) -> str:
    """Writes text to a new temporary file in directory and returns its path"""
    handle, temp_path = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as stream:
            stream.write(text)
    except BaseException:
        os.unlink(temp_path)
        raise
    return temp_path


class OutputSet:
    """
    Class that collects the files of one run and writes them together
    """

    def __init__(self, directory: str):
        self.directory = directory
        self.files: Dict[str, str] = {}

    def __repr__(self):
        return f"<OutputSet {self.directory} {sorted(self.files)}>"

    def add_text(self, name: str, text: str) -> str:
        self.files[name] = text
        return os.path.join(self.directory, name)

    def add_csv(self, name: str, header: Sequence[str], records: Iterable[Sequence[str]]) -> str:
        return self.add_text(name, render_csv(header, records))

    def add_manifest(self, run_config: dict, name: str = MANIFEST_NAME) -> dict:
        """Adds a manifest listing every file added so far"""
        manifest = build_manifest(run_config, list(self.files))
        self.add_text(name, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return manifest

    def commit(self) -> List[str]:
        """Stages every file, then renames them all into place"""
        directory = os.path.abspath(self.directory)
        os.makedirs(directory, exist_ok=True)
        staged = []
        try:
            for name, text in self.files.items():
                staged.append((stage_text(directory, text), os.path.join(directory, name)))
        except BaseException:
            for temp_path, _ in staged:
                os.unlink(temp_path)
            raise
        for temp_path, path in staged:
            os.replace(temp_path, path)
            logger.info("Wrote %s", path)
        return [path for _, path in staged]
