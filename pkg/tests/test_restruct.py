import os
import tempfile
import unittest

from promptforge.errors import (
    HashEncodeError,
    JSONDecodeError,
    JSONEncodeError,
)

from promptforge.restruct import (
    csv_dump,
    gen_hash,
    json_dump,
    json_dumps,
    json_load,
    json_loads,
    jsonl_dump,
    jsonl_dumps,
    jsonl_loader,
)


class TestJsonDumps(unittest.TestCase):
    def test_compact_sorted(self):
        self.assertEqual(json_dumps({"b": 1, "a": [1, 2]}), '{"a":[1,2],"b":1}')

    def test_pretty(self):
        self.assertEqual(json_dumps({"b": 1, "a": None}, pretty=True), '{\n  "a": null,\n  "b": 1\n}')

    def test_non_ascii_kept(self):
        self.assertEqual(json_dumps("naïve"), '"naïve"')

    def test_tuple_encodes_as_array(self):
        self.assertEqual(json_dumps((1, 2)), "[1,2]")

    def test_unencodable(self):
        with self.assertRaises(JSONEncodeError):
            json_dumps({"a": object()})

    def test_error_is_type_error(self):
        with self.assertRaises(TypeError):
            json_dumps(object())


class TestJsonLoads(unittest.TestCase):
    def test_strict(self):
        self.assertEqual(json_loads('{"a": [1, 2.5]}'), {"a": [1, 2.5]})

    def test_strict_rejects_comments(self):
        with self.assertRaises(JSONDecodeError):
            json_loads('{"a": 1 // comment\n}')

    def test_lenient_accepts_comments_and_trailing_commas(self):
        self.assertEqual(json_loads('{"a": 1, // comment\n "b": [2,],}', lenient=True), {"a": 1, "b": [2]})

    def test_invalid(self):
        with self.assertRaises(JSONDecodeError):
            json_loads("{")

    def test_error_is_value_error(self):
        with self.assertRaises(ValueError):
            json_loads("not json")


class TestJsonFiles(unittest.TestCase):
    def test_dump_is_canonical(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            first = os.path.join(tmpdir, "first.json")
            second = os.path.join(tmpdir, "second.json")
            json_dump(first, {"b": 2, "a": 1})
            json_dump(second, {"a": 1, "b": 2})
            with open(first, "rb") as rf:
                first_bytes = rf.read()
            with open(second, "rb") as rf:
                self.assertEqual(first_bytes, rf.read())
            self.assertTrue(first_bytes.endswith(b"}\n"))
            self.assertEqual(json_load(first), {"a": 1, "b": 2})

    def test_jsonl(self):
        self.assertEqual(jsonl_dumps([{"a": 1}, {"b": 2}]), '{"a":1}\n{"b":2}\n')
        self.assertEqual(jsonl_dumps([]), "")


class TestParentDirectories(unittest.TestCase):
    def test_writers_create_missing_directories(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            nested = os.path.join(tmpdir, "run", "corpora")
            json_dump(os.path.join(nested, "a.json"), {"a": 1})
            jsonl_dump(os.path.join(tmpdir, "run", "b", "c.jsonl"), [{"a": 1}])
            csv_dump(os.path.join(tmpdir, "report", "d.csv"), ("a",), [["1"]])
            self.assertEqual(json_load(os.path.join(nested, "a.json")), {"a": 1})
            self.assertTrue(os.path.isfile(os.path.join(tmpdir, "run", "b", "c.jsonl")))
            self.assertTrue(os.path.isfile(os.path.join(tmpdir, "report", "d.csv")))


class TestJsonlLoader(unittest.TestCase):
    def _write(self, tmpdir, text):
        path = os.path.join(tmpdir, "data.jsonl")
        with open(path, "w", encoding="utf-8") as wf:
            wf.write(text)
        return path

    def test_line_numbers_skip_blank_lines(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = self._write(tmpdir, '{"a": 1}\n\n{"a": 2}\n')
            self.assertEqual(list(jsonl_loader(path)), [(1, {"a": 1}), (3, {"a": 2})])

    def test_blank_line_rejected(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = self._write(tmpdir, '{"a": 1}\n\n{"a": 2}\n')
            with self.assertRaises(JSONDecodeError):
                list(jsonl_loader(path, allow_empty_lines=False))

    def test_error_carries_line_number(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = self._write(tmpdir, '{"a": 1}\n{"a": \n')
            with self.assertRaises(JSONDecodeError) as ctx:
                list(jsonl_loader(path))
            self.assertEqual(ctx.exception.line_number, 2)

    def test_invalid_utf8_carries_line_number(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "data.jsonl")
            with open(path, "wb") as wf:
                wf.write(b'{"a": 1}\n{"a": "\xff"}\n')
            with self.assertRaises(JSONDecodeError) as ctx:
                list(jsonl_loader(path))
            self.assertEqual(ctx.exception.line_number, 2)

    def test_round_trip(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "data.jsonl")
            jsonl_dump(path, [{"id": "a"}, {"id": "b"}])
            self.assertEqual([obj for _, obj in jsonl_loader(path)], [{"id": "a"}, {"id": "b"}])


class TestCsvDump(unittest.TestCase):
    def test_writes_header_and_rows(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "table.csv")
            csv_dump(path, ("condition", "delta"), [["brain fog", "-64%"], ["a,b", "0%"]])
            with open(path, "rb") as rf:
                self.assertEqual(rf.read(), b'condition,delta\nbrain fog,-64%\n"a,b",0%\n')

    def test_width_mismatch(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with self.assertRaises(ValueError):
                csv_dump(os.path.join(tmpdir, "table.csv"), ("a", "b"), [["1"]])


class TestGenHash(unittest.TestCase):
    def test_string_and_bytes_agree(self):
        self.assertEqual(gen_hash("abc"), gen_hash(b"abc"))
        self.assertEqual(
            gen_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
        )

    def test_dict_order_irrelevant(self):
        self.assertEqual(gen_hash({"a": 1, "b": 2}), gen_hash({"b": 2, "a": 1}))

    def test_tuple_equals_list(self):
        self.assertEqual(gen_hash((1, "x")), gen_hash([1, "x"]))

    def test_distinct_values(self):
        self.assertNotEqual(gen_hash([0.0, 1]), gen_hash([0.0, 2]))

    def test_unhashable(self):
        with self.assertRaises(HashEncodeError):
            gen_hash(object())
