from unittest import TestCase
from knav.formats import (
    FormatError, write_frames, read_frames, write_snapshots, read_snapshots, write_matrix, read_matrix, read_csv,
    write_polytopes, write_step_polytopes, write_eigenvalues, write_json, read_json, file_digest,
)
from knav.geometry import ObstaclePolytope
from knav.lifting import DensitySnapshot
from knav.verify import CheckResult
from pathlib import Path
import numpy as np
import tempfile
import hashlib


class FormatTestCase(TestCase):
    def setUp(self):
        self._directory = tempfile.TemporaryDirectory()
        self.directory = Path(self._directory.name)

    def tearDown(self):
        self._directory.cleanup()

    def writeText(self, name: str, content: str) -> Path:
        path = self.directory / name
        with open(path, "w") as f:
            f.write(content)
        return path


class FrameFileTest(FormatTestCase):
    def testRoundTrip(self):
        rng = np.random.default_rng(0)
        frames = [rng.uniform(size=(3, 4)) for _ in range(3)]
        path = self.directory / "frames.txt"
        write_frames(path, frames, ["seed 3", "dt 0.1"])
        read, comments = read_frames(path)
        self.assertEqual(comments, ["seed 3", "dt 0.1"])
        self.assertEqual(len(read), 3)
        for a, b in zip(frames, read):
            np.testing.assert_array_equal(a, b)

    def testLayout(self):
        path = self.directory / "frames.txt"
        write_frames(path, [np.array([[0.5, 1.0]]), np.array([[0.0, 0.25]])])
        with open(path) as f:
            self.assertEqual(f.read(), "1 2 2\n0.5,1.0\n\n0.0,0.25\n")

    def testWriteErrors(self):
        with self.assertRaises(FormatError):
            write_frames(self.directory / "empty.txt", [])
        with self.assertRaises(FormatError):
            write_frames(self.directory / "mixed.txt", [np.zeros((2, 2)), np.zeros((2, 3))])

    def testBadHeader(self):
        with self.assertRaises(FormatError):
            read_frames(self.writeText("bad.txt", "two by two\n0,0\n"))
        with self.assertRaises(FormatError):
            read_frames(self.writeText("empty.txt", ""))

    def testFrameCount(self):
        with self.assertRaises(FormatError):
            read_frames(self.writeText("count.txt", "1 2 2\n0,0\n"))

    def testRowCount(self):
        with self.assertRaises(FormatError):
            read_frames(self.writeText("rows.txt", "2 2 1\n0,0\n"))

    def testColumnCount(self):
        with self.assertRaises(FormatError):
            read_frames(self.writeText("cols.txt", "1 2 1\n0,0,0\n"))

    def testUnparsable(self):
        with self.assertRaises(FormatError):
            read_frames(self.writeText("nan.txt", "1 2 1\n0,x\n"))

    def testSnapshots(self):
        path = self.directory / "snapshots.txt"
        write_snapshots(path, [DensitySnapshot([[0.1, 0.2]], 0), DensitySnapshot([[0.3, 0.4]], 1)])
        snapshots = read_snapshots(path)
        self.assertEqual([s.timestamp for s in snapshots], [0, 1])
        np.testing.assert_array_equal(snapshots[1].values, [[0.3, 0.4]])
        self.assertEqual(read_snapshots(path, start=5)[0].timestamp, 5)

    def testSnapshotRange(self):
        with self.assertRaises(FormatError):
            read_snapshots(self.writeText("range.txt", "1 2 1\n0.5,1.5\n"))

    def testMatrix(self):
        path = self.directory / "operator.txt"
        matrix = np.array([[1.0, -2.5], [0.125, 3.0]])
        write_matrix(path, matrix, ["provenance distributed"])
        np.testing.assert_array_equal(read_matrix(path), matrix)
        with self.assertRaises(FormatError):
            read_matrix(self.writeText("two.txt", "1 1 2\n0\n\n1\n"))


class TableTest(FormatTestCase):
    def testPolytopes(self):
        polytope = ObstaclePolytope([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]], [1.0, 2.0, 3.0], np.zeros((3, 2)), 0.5, horizon=2, index=1)
        path = self.directory / "polytopes.csv"
        write_polytopes(path, [polytope])
        rows = read_csv(path)
        self.assertEqual(len(rows), 3)
        self.assertEqual(rows[0], {"h": "3", "l": "2", "i": "1", "n_x": "1.0", "n_y": "0.0", "rho": "1.0"})
        self.assertEqual([r["i"] for r in rows], ["1", "2", "3"])

        stepped = self.directory / "step_polytopes.csv"
        write_step_polytopes(stepped, [(0, polytope), (20, polytope)])
        rows = read_csv(stepped)
        self.assertEqual(len(rows), 6)
        self.assertEqual(rows[-1]["step"], "20")

    def testEigenvalues(self):
        path = self.directory / "eigenvalues.csv"
        write_eigenvalues(path, {"distributed": np.array([0.5 + 0.25j]), "centralized": np.array([1.0, 0.5])})
        rows = read_csv(path)
        self.assertEqual([r["set"] for r in rows], ["centralized", "centralized", "distributed"])
        self.assertEqual(rows[2]["im"], "0.25")
        self.assertEqual(rows[1]["index"], "2")


class JsonTest(FormatTestCase):
    def testRoundTrip(self):
        path = self.directory / "report.json"
        content = {
            "count": np.int64(3),
            "value": np.float64(0.5),
            "values": np.arange(3),
            "spectrum": np.array([1 + 2j]),
            "check": CheckResult("oracle_orthogonality", True, 0.0, 1e-8),
        }
        write_json(path, content)
        read = read_json(path)
        self.assertEqual(read["count"], 3)
        self.assertEqual(read["values"], [0, 1, 2])
        self.assertEqual(read["spectrum"], [[1.0, 2.0]])
        self.assertEqual(read["check"]["name"], "oracle_orthogonality")
        self.assertTrue(read["check"]["passed"])

    def testSortedKeys(self):
        path = self.directory / "sorted.json"
        write_json(path, {"b": 1, "a": 2})
        with open(path) as f:
            text = f.read()
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertTrue(text.endswith("\n"))

    def testInvalid(self):
        with self.assertRaises(FormatError):
            read_json(self.writeText("broken.json", "{"))


class DigestTest(FormatTestCase):
    def testDigest(self):
        path = self.writeText("data.txt", "hello\n")
        self.assertEqual(file_digest(path), hashlib.sha256(b"hello\n").hexdigest())
