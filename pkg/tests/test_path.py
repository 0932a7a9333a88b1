import os
import tempfile
import unittest
from unittest import mock

from promptforge.path import (
    default_cache_dir,
    ensure_abspath,
    iteration_dir,
    resolve_against,
    resolve_path,
    stringify_path,
    unique_run_dir,
)


class PathLike:
    def __init__(self, path):
        self.path = path

    def __fspath__(self):
        return self.path


class NonPathLike:
    pass


class TestStringifyPath(unittest.TestCase):
    def test_string(self):
        self.assertEqual(stringify_path("path/to/file"), "path/to/file")

    def test_pathlike_object(self):
        self.assertEqual(stringify_path(PathLike("path/to/file")), "path/to/file")

    def test_expands_user(self):
        self.assertEqual(
            stringify_path("~/runs"),
            os.path.join(os.path.expanduser("~"), "runs"),
        )

    def test_not_pathlike_object(self):
        with self.assertRaises(TypeError):
            stringify_path(NonPathLike())


class TestEnsureAbspath(unittest.TestCase):
    def test_relative_path(self):
        self.assertEqual(ensure_abspath("path/to/file"), os.path.abspath("path/to/file"))

    def test_already_absolute(self):
        self.assertEqual(ensure_abspath("/path/to/file"), "/path/to/file")


class TestResolvePath(unittest.TestCase):
    def test_relative_string_path(self):
        self.assertEqual(resolve_path("path/to/file"), os.path.abspath("path/to/file"))

    def test_relative_pathlike_path(self):
        self.assertEqual(resolve_path(PathLike("path/to/file")), os.path.abspath("path/to/file"))

    def test_nonpathlike(self):
        with self.assertRaises(TypeError):
            resolve_path(NonPathLike())


class TestResolveAgainst(unittest.TestCase):
    def test_relative_to_base(self):
        self.assertEqual(
            resolve_against("/configs", "../data/dev.jsonl"),
            "/data/dev.jsonl",
        )

    def test_absolute_unchanged(self):
        self.assertEqual(resolve_against("/configs", "/data/dev.jsonl"), "/data/dev.jsonl")


class TestDefaultCacheDir(unittest.TestCase):
    def test_xdg_cache_home(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with mock.patch.dict(os.environ, {"XDG_CACHE_HOME": tmpdir}):
                self.assertEqual(default_cache_dir(), os.path.join(tmpdir, "promptforge"))

    def test_empty_environment_variable(self):
        with mock.patch.dict(os.environ, {"XDG_CACHE_HOME": ""}):
            self.assertEqual(
                default_cache_dir(),
                os.path.join(os.path.expanduser("~"), ".cache", "promptforge"),
            )

    def test_non_absolute_environment_variable(self):
        with mock.patch.dict(os.environ, {"XDG_CACHE_HOME": "path/to/cache"}):
            self.assertEqual(
                default_cache_dir(),
                os.path.join(os.path.expanduser("~"), ".cache", "promptforge"),
            )


class TestRunDirectories(unittest.TestCase):
    def test_iteration_dir(self):
        self.assertEqual(iteration_dir("/runs/a", 3), "/runs/a/iteration_3")

    def test_unique_run_dir_fresh(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            self.assertEqual(unique_run_dir(tmpdir, "run"), os.path.join(tmpdir, "run"))

    def test_unique_run_dir_never_reuses(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            os.makedirs(os.path.join(tmpdir, "run"))
            os.makedirs(os.path.join(tmpdir, "run-1"))
            self.assertEqual(unique_run_dir(tmpdir, "run"), os.path.join(tmpdir, "run-2"))
