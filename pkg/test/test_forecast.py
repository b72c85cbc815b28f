from unittest import TestCase
from knav.forecast import (
    GridWorldMap, ForecastSequence, ForecastError, EXACT_FIT, propagate, reconstruct, forecast, persistence,
    threshold_set, normalized_errors, forecast_error_map,
)
from knav.lifting import DensitySnapshot, DataMatrices, KoopmanOperator, lift_snapshot, centralized_edmd
import numpy as np


class GridWorldMapTest(TestCase):
    def testCellCenters(self):
        world = GridWorldMap(30, 30, 0.5)
        self.assertEqual(world.cellCenter(0, 0), (0.25, 0.25))
        x, y = world.cellCenter(2, 5)
        self.assertEqual((float(x), float(y)), (2.75, 1.25))
        self.assertEqual(world.extent, (0.0, 0.0, 15.0, 15.0))

    def testOrigin(self):
        world = GridWorldMap(2, 4, 1.0, (-2.0, 1.0))
        xs, ys = world.centers()
        self.assertEqual(xs.shape, (2, 4))
        self.assertEqual(float(xs[0, 0]), -1.5)
        self.assertEqual(float(ys[1, 0]), 2.5)
        self.assertTrue(world.contains(np.column_stack([xs.ravel(), ys.ravel()])))
        self.assertFalse(world.contains([[3.0, 1.5]]))

    def testInvalid(self):
        with self.assertRaises(ForecastError):
            GridWorldMap(3, 3, 0.0)
        with self.assertRaises(ForecastError):
            GridWorldMap(0, 3, 1.0)


class PropagateTest(TestCase):
    def testIdentity(self):
        x = np.array([0.1, 0.7, 0.3])
        for v in propagate(KoopmanOperator(np.eye(3)), x, 3):
            np.testing.assert_array_equal(v, x)

    def testScalarGeometric(self):
        result = propagate(KoopmanOperator([[2.0]]), np.array([1.0]), 3)
        self.assertEqual([float(v[0]) for v in result], [2.0, 4.0, 8.0])

    def testDimensionMismatch(self):
        with self.assertRaises(ForecastError):
            propagate(KoopmanOperator(np.eye(3)), np.ones(4), 2)
        with self.assertRaises(ForecastError):
            propagate(KoopmanOperator(np.eye(3)), np.ones(3), 0)


class ReconstructTest(TestCase):
    def testRoundTrip(self):
        s = DensitySnapshot(np.random.default_rng(0).uniform(size=(3, 4)))
        self.assertTrue(np.array_equal(reconstruct(lift_snapshot(s), s.shape).values, s.values))

    def testClamps(self):
        s = reconstruct(np.array([1.3, -0.2, 0.5, 0.0]), (2, 2))
        np.testing.assert_array_equal(s.values, [[1.0, 0.0], [0.5, 0.0]])

    def testLengthMismatch(self):
        with self.assertRaises(ForecastError):
            reconstruct(np.zeros(5), (2, 2))


class ForecastSequenceTest(TestCase):
    def testIdentityForecastRepeatsFrame(self):
        s = DensitySnapshot(np.random.default_rng(1).uniform(size=(4, 4)), 10)
        sequence = forecast(KoopmanOperator(np.eye(16)), s, 14)
        self.assertEqual(sequence.horizon, 14)
        self.assertEqual(sequence.origin, 10)
        for h in range(1, 15):
            np.testing.assert_array_equal(sequence[h].values, s.values)
            self.assertEqual(sequence[h].timestamp, 10 + h)

    def testOneBased(self):
        sequence = persistence(DensitySnapshot(np.zeros((2, 2))), 3)
        self.assertEqual(len(list(sequence)), 3)
        with self.assertRaises(IndexError):
            sequence[0]
        with self.assertRaises(IndexError):
            sequence[4]

    def testNeedsFrames(self):
        with self.assertRaises(ForecastError):
            ForecastSequence(0, [])
        with self.assertRaises(ForecastError):
            ForecastSequence(0, [DensitySnapshot(np.zeros((2, 2))), DensitySnapshot(np.zeros((2, 3)))])


class ThresholdSetTest(TestCase):
    def setUp(self):
        self.world = GridWorldMap(3, 3, 0.5)

    def testEmpty(self):
        points = threshold_set(DensitySnapshot(np.zeros((3, 3))), 0.3, self.world)
        self.assertEqual(len(points), 0)
        self.assertEqual(points.points.shape, (0, 2))

    def testSingleCell(self):
        values = np.zeros((3, 3))
        values[0, 0] = 0.9
        points = threshold_set(DensitySnapshot(values), 0.5, self.world, horizon=2)
        np.testing.assert_array_equal(points.points, [[0.25, 0.25]])
        self.assertEqual(points.horizon, 2)

    def testStrictInequality(self):
        points = threshold_set(DensitySnapshot(np.full((3, 3), 0.5)), 0.5, self.world)
        self.assertEqual(len(points), 0)

    def testAllCells(self):
        points = threshold_set(DensitySnapshot(np.full((3, 3), 0.01)), 0.0, self.world)
        self.assertEqual(len(points), 9)

    def testThresholdOne(self):
        self.assertEqual(len(threshold_set(DensitySnapshot(np.ones((3, 3))), 1.0, self.world)), 0)

    def testMonotoneInThreshold(self):
        s = DensitySnapshot(np.random.default_rng(2).uniform(size=(3, 3)))
        counts = [len(threshold_set(s, c, self.world)) for c in np.linspace(0.0, 1.0, 21)]
        self.assertTrue(all(a >= b for a, b in zip(counts, counts[1:])))

    def testWeights(self):
        values = np.zeros((3, 3))
        values[1, 2] = 0.8
        points = threshold_set(DensitySnapshot(values), 0.5, self.world, weighted=True)
        np.testing.assert_array_equal(points.weights, [0.8])

    def testShapeMismatch(self):
        with self.assertRaises(ForecastError):
            threshold_set(DensitySnapshot(np.zeros((2, 3))), 0.5, self.world)
        with self.assertRaises(ForecastError):
            threshold_set(DensitySnapshot(np.zeros((3, 3))), 1.5, self.world)


class NormalizedErrorsTest(TestCase):
    def setUp(self):
        frames = np.random.default_rng(4).uniform(size=(6, 21))
        self.d = DataMatrices(frames[:, :-1], frames[:, 1:])
        self.oracle = centralized_edmd(self.d)

    def testIdenticalOperators(self):
        e_1, e_h = normalized_errors(self.oracle, self.oracle, self.d, 14)
        self.assertEqual(e_1, 1.0)
        self.assertEqual(e_h, 1.0)

    def testOracleIsOptimal(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            perturbed = self.oracle.matrix + 1e-3 * rng.standard_normal((6, 6))
            e_1, _ = normalized_errors(perturbed, self.oracle, self.d, 3)
            self.assertGreaterEqual(e_1, 1.0 - 1e-9)

    def testExactFit(self):
        d = DataMatrices(np.eye(3), np.random.default_rng(6).uniform(size=(3, 3)))
        e_1, _ = normalized_errors(centralized_edmd(d), centralized_edmd(d), d, 1)
        self.assertIs(e_1, EXACT_FIT)
        self.assertFalse(e_1)

    def testInvalid(self):
        with self.assertRaises(ForecastError):
            normalized_errors(self.oracle, np.eye(5), self.d, 1)
        with self.assertRaises(ForecastError):
            normalized_errors(self.oracle, self.oracle, self.d, 0)


class ErrorMapTest(TestCase):
    def testGrowingError(self):
        truth = [DensitySnapshot(np.zeros((2, 2)), h) for h in range(1, 5)]
        predicted = ForecastSequence(0, [DensitySnapshot(np.full((2, 2), 0.1 * h), h) for h in range(1, 5)])
        error_map = forecast_error_map(predicted, truth)
        self.assertEqual(error_map.cells.shape, (4, 2, 2))
        np.testing.assert_allclose(error_map.step_errors, [0.2, 0.4, 0.6, 0.8])
        self.assertAlmostEqual(error_map.trend(), 1.0)

    def testNeedsTruth(self):
        predicted = persistence(DensitySnapshot(np.zeros((2, 2))), 3)
        with self.assertRaises(ForecastError):
            forecast_error_map(predicted, [DensitySnapshot(np.zeros((2, 2)))])

    def testFlatTrend(self):
        predicted = persistence(DensitySnapshot(np.zeros((2, 2))), 3)
        self.assertEqual(forecast_error_map(predicted, list(predicted)).trend(), 0.0)
