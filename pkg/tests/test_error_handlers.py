"""
Test cases for error handlers, writers and log handlers
"""

import json
import logging
import os
import tempfile
from unittest import TestCase
from unittest.mock import patch

from switchcast.common import log_handlers, status
from switchcast.common.error_handlers import handle_error
from switchcast.common.writers import (
    MANIFEST_NAME,
    OutputSet,
    build_manifest,
    render_csv,
    sha256_file,
    stage_text,
)
from switchcast.models import (
    ConfigurationError,
    DataValidationError,
    EnumerationCapError,
    InvariantViolation,
    OutcomeError,
    UndefinedPosteriorError,
)


######################################################################
#  E R R O R   H A N D L E R S
######################################################################
class TestErrorHandlers(TestCase):
    """Test Cases for the exit status of each error"""

    def test_status_codes(self):
        """It should map each error onto its exit status"""
        cases = [
            (DataValidationError("bad flag"), status.EX_DATAERR),
            (OutcomeError("symbol 300"), status.EX_DATAERR),
            (FileNotFoundError("book.txt"), status.EX_NOINPUT),
            (PermissionError("out"), status.EX_IOERR),
            (ConfigurationError("theta"), status.EX_CONFIG),
            (EnumerationCapError("too long"), status.EX_USAGE),
            (InvariantViolation("posterior"), status.EX_INVARIANT),
            (UndefinedPosteriorError("all zero"), status.EX_SOFTWARE),
            (KeyError("surprise"), status.EX_SOFTWARE),
        ]
        for error, code in cases:
            with self.assertLogs("switchcast.errors", level="WARNING"):
                self.assertEqual(handle_error(error), code, repr(error))

    def test_message_names_module(self):
        """It should prefix the message with the module that raised it"""
        try:
            json.loads("{")
        except ValueError as error:
            with self.assertLogs("switchcast.errors", level="CRITICAL") as logs:
                handle_error(error)
        self.assertIn("json.decoder:", logs.output[0])


######################################################################
#  W R I T E R S
######################################################################
class TestWriters(TestCase):
    """Test Cases for the output writers"""

    def setUp(self):
        self.tempdir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tempdir.cleanup()

    def read(self, *parts):
        with open(os.path.join(self.tempdir.name, *parts), encoding="utf-8") as handle:
            return handle.read()

    def test_csv(self):
        """It should render and write CSV text with a header"""
        self.assertEqual(render_csv(["n", "x"], [["1", "0.5"]]), "n,x\n1,0.5\n")
        outputs = OutputSet(os.path.join(self.tempdir.name, "deep"))
        path = outputs.add_csv("table.csv", ["n"], [["1"], ["2"]])
        self.assertFalse(os.path.exists(path))
        self.assertEqual(outputs.commit(), [os.path.abspath(path)])
        self.assertEqual(self.read("deep", "table.csv"), "n\n1\n2\n")

    def test_replace(self):
        """It should replace files without leaving temporary files behind"""
        for text in ("first", "second"):
            outputs = OutputSet(self.tempdir.name)
            outputs.add_text("out.txt", text)
            outputs.commit()
        self.assertEqual(self.read("out.txt"), "second")
        self.assertEqual(os.listdir(self.tempdir.name), ["out.txt"])

    def test_failed_staging(self):
        """It should leave earlier outputs untouched when any file fails to stage"""
        outputs = OutputSet(self.tempdir.name)
        outputs.add_text("table.csv", "old")
        outputs.commit()
        staged = []

        def failing(directory, text):
            if staged:
                raise OSError("No space left on device")
            staged.append(stage_text(directory, text))
            return staged[-1]

        outputs = OutputSet(self.tempdir.name)
        outputs.add_text("table.csv", "new")
        outputs.add_manifest({"subcommand": "catchup"})
        with patch("switchcast.common.writers.stage_text", side_effect=failing):
            self.assertRaises(OSError, outputs.commit)
        self.assertEqual(self.read("table.csv"), "old")
        self.assertEqual(os.listdir(self.tempdir.name), ["table.csv"])

    def test_manifest(self):
        """It should echo the config with version, input hash and outputs"""
        source = os.path.join(self.tempdir.name, "input.txt")
        with open(source, "w", encoding="utf-8") as handle:
            handle.write("abc")
        outputs = OutputSet(self.tempdir.name)
        outputs.add_csv("catchup.csv", ["n"], [])
        manifest = outputs.add_manifest({"subcommand": "catchup", "input": source, "seed": 4})
        self.assertEqual(
            manifest["input_sha256"], "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        )
        self.assertEqual(manifest["outputs"], ["catchup.csv"])
        self.assertEqual(manifest["seed"], 4)
        expected = build_manifest({"subcommand": "catchup", "input": source, "seed": 4}, ["catchup.csv"])
        self.assertEqual(manifest, expected)
        outputs.commit()
        self.assertEqual(json.loads(self.read(MANIFEST_NAME)), manifest)
        self.assertIsNone(sha256_file(None))


######################################################################
#  L O G   H A N D L E R S
######################################################################
class TestLogHandlers(TestCase):
    """Test Cases for logging setup"""

    def tearDown(self):
        logger = logging.getLogger("switchcast.test")
        logger.handlers = []
        logger.propagate = True

    def test_init_logging(self):
        """It should install one stderr handler with the shared format"""
        logger = log_handlers.init_logging("switchcast.test", "debug")
        log_handlers.init_logging("switchcast.test", "debug")
        self.assertEqual(len(logger.handlers), 1)
        self.assertEqual(logger.level, logging.DEBUG)
        self.assertFalse(logger.propagate)
        self.assertIn("[%(levelname)s]", logger.handlers[0].formatter._fmt)  # pylint: disable=protected-access

    def test_banner(self):
        """It should log a spaced title between rules of stars"""
        logger = logging.getLogger("switchcast.banner")
        with self.assertLogs(logger, level="INFO") as logs:
            log_handlers.log_banner(logger, "run")
        self.assertEqual(len(logs.output), 3)
        self.assertIn("  R U N  ", logs.output[1])
        self.assertTrue(logs.output[0].endswith("*" * 70))
