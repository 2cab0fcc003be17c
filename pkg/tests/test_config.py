import json
import os
import tempfile
import unittest

from pydantic import ValidationError

from mfalloc.config import RunConfig, default_methods, load_run_config, parse_index_list
from mfalloc.models import ModelName
from mfalloc.selectors import Method


class TestRunConfig(unittest.TestCase):

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual(config.sizes, list(range(1, 21)))
        self.assertEqual(config.random_trials, 100)
        self.assertEqual(config.scoring, "held_out")
        self.assertEqual([c.method for c in config.methods], [c.method for c in default_methods()])

    def test_method_names_expand(self):
        config = RunConfig(methods=["gomp", {"method": "lev", "leverage_rank": 3}], model="pendulum")
        self.assertEqual(config.methods[0].method, Method.GOMP)
        self.assertEqual(config.methods[1].leverage_rank, 3)
        self.assertEqual(config.model, ModelName.PENDULUM)

    def test_rejects_bad_values(self):
        for bad in ({"sizes": [3, 2]}, {"sizes": []}, {"sizes": [0, 1]}, {"scoring": "train"},
                    {"random_trials": 0}, {"unknown": 1}, {"methods": ["svd"]}):
            with self.subTest(bad=bad), self.assertRaises(ValidationError):
                RunConfig(**bad)


class TestLoadRunConfig(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, text):
        path = os.path.join(self.tmp.name, "run.json")
        with open(path, "w", encoding="utf-8") as file:
            file.write(text)
        return path

    def test_round_trip(self):
        path = self.write(json.dumps({"model": "burgers", "sizes": [2, 4, 8], "workers": 4}))
        config = load_run_config(path)
        self.assertEqual(config.sizes, [2, 4, 8])
        self.assertEqual(config.workers, 4)

    def test_errors_name_the_file(self):
        for text in ("{broken", "[1, 2]", json.dumps({"sizes": [5, 1]})):
            path = self.write(text)
            with self.subTest(text=text), self.assertRaises(ValueError) as ctx:
                load_run_config(path)
            self.assertIn(path, str(ctx.exception))

    def test_missing_file(self):
        with self.assertRaises(ValueError):
            load_run_config(os.path.join(self.tmp.name, "absent.json"))


class TestParseIndexList(unittest.TestCase):

    def test_one_based_to_zero_based(self):
        self.assertEqual(parse_index_list("1,3, 5", 5), [0, 2, 4])
        self.assertEqual(parse_index_list("2 4", 5), [1, 3])

    def test_invalid_lists(self):
        for text in ("", " , ", "0", "6", "1,1", "a,b"):
            with self.subTest(text=text), self.assertRaises(ValueError):
                parse_index_list(text, 5)


if __name__ == "__main__":
    unittest.main()
