from unittest import TestCase
from concurrent.futures import ThreadPoolExecutor
from knav.graph import build_graph, laplacian
from knav.learning import (
    LearningError, init_agents, warm_start_agents, assemble_operator, build_convergence_matrix, alpha_max, rho_max,
    iteration_budget, required_rounds, step, consensus_defect, run, geometric_rate, fit_distributed, sorted_eigenvalues,
    spectrum_distance, spectral_radius, spectral_report, operator_diff_map,
)
from knav.lifting import DataMatrices, centralized_edmd, residual_orthogonality, balanced_sizes, partition_rows
from scipy import linalg
import numpy as np
import math


class LearningTestCase(TestCase):
    def setUp(self):
        rng = np.random.default_rng(7)
        frames = rng.uniform(0.0, 1.0, (12, 7))
        self.d = DataMatrices(frames[:, :-1], frames[:, 1:])
        self.g = build_graph("ring", 3)
        self.L = laplacian(self.g)
        self.sizes = balanced_sizes(12, 3)
        self.partitions = partition_rows(self.d, 3, self.sizes)


class AgentTest(LearningTestCase):
    def testInitialization(self):
        agents = init_agents(self.partitions)
        self.assertEqual(len(agents), 3)
        for a in agents:
            self.assertEqual(a.K.shape, (12, 4))
            np.testing.assert_array_equal(a.K, 0.0)
            np.testing.assert_array_equal(a.S[a.offset:a.offset + 4], -a.Y)
        self.assertEqual([a.offset for a in agents], [0, 4, 8])
        self.assertEqual(consensus_defect(agents), 0.0)
        np.testing.assert_array_equal(assemble_operator(agents).matrix, np.zeros((12, 12)))

    def testWarmStartKeepsInvariant(self):
        rng = np.random.default_rng(1)
        blocks = [rng.standard_normal((12, 4)) for _ in range(3)]
        agents = warm_start_agents(self.partitions, blocks)
        self.assertLessEqual(consensus_defect(agents), 1e-12)
        np.testing.assert_array_equal(assemble_operator(agents).matrix, np.hstack(blocks))

    def testWarmStartShapes(self):
        with self.assertRaises(LearningError):
            warm_start_agents(self.partitions, [np.zeros((12, 4))] * 2)
        with self.assertRaises(LearningError):
            warm_start_agents(self.partitions, [np.zeros((12, 3))] * 3)

    def testInconsistentPartitions(self):
        with self.assertRaises(LearningError):
            init_agents([(np.zeros((2, 3)), np.zeros((2, 3))), (np.zeros((2, 4)), np.zeros((2, 4)))])
        with self.assertRaises(LearningError):
            init_agents([])

    def testStepNeedsMatchingGraph(self):
        with self.assertRaises(LearningError):
            step(init_agents(self.partitions), 0.01, build_graph("ring", 4))

    def testStepPreservesConsensusInvariant(self):
        m = build_convergence_matrix(self.partitions, self.L, self.d.N)
        alpha = 0.5 * alpha_max(m)
        agents = init_agents(self.partitions)
        for _ in range(50):
            agents = step(agents, alpha, self.g)
            self.assertLessEqual(consensus_defect(agents), 1e-10 * (1 + np.linalg.norm(self.d.Y)))
        self.assertEqual(consensus_defect(agents, w_star_free=False), consensus_defect(agents))

    def testExecutorGivesSameResult(self):
        alpha = 0.5 * alpha_max(build_convergence_matrix(self.partitions, self.L, self.d.N))
        serial = init_agents(self.partitions)
        parallel = init_agents(self.partitions)
        with ThreadPoolExecutor(max_workers=3) as executor:
            for _ in range(20):
                serial = step(serial, alpha, self.g)
                parallel = step(parallel, alpha, self.g, executor)
        for a, b in zip(serial, parallel):
            np.testing.assert_array_equal(a.K, b.K)
            np.testing.assert_array_equal(a.S, b.S)


class ConvergenceMatrixTest(LearningTestCase):
    def reduced(self):
        # the nonzero spectrum of M is the negated spectrum of A^T A + L (x) I
        A = linalg.block_diag(*[X for X, _ in self.partitions])
        return np.linalg.eigvalsh(A.T @ A + np.kron(self.L, np.eye(self.d.N)))

    def testDimension(self):
        m = build_convergence_matrix(self.partitions, self.L, self.d.N)
        self.assertEqual(m.dimension, 12 + 3 * 6)
        self.assertLessEqual(m.eigenvalues().real.max(), m.zeroThreshold())

    def testAlphaMax(self):
        m = build_convergence_matrix(self.partitions, self.L, self.d.N)
        self.assertAlmostEqual(alpha_max(m), 2.0 / self.reduced().max(), delta=1e-8 * alpha_max(m))

    def testRhoMax(self):
        m = build_convergence_matrix(self.partitions, self.L, self.d.N)
        alpha = 0.5 * alpha_max(m)
        mu = self.reduced()
        mu = mu[mu > 1e-9 * mu.max()]
        expected = np.abs(1.0 - alpha * mu).max()
        self.assertAlmostEqual(rho_max(m, alpha), expected, delta=1e-7)
        self.assertLess(rho_max(m, alpha), 1.0)
        with self.assertRaises(LearningError):
            rho_max(m, 0.0)

    def testLaplacianShape(self):
        with self.assertRaises(LearningError):
            build_convergence_matrix(self.partitions, np.zeros((2, 2)), self.d.N)

    def testIterationBudget(self):
        self.assertEqual(iteration_budget(0.5, 1e-8), 27)
        self.assertEqual(iteration_budget(0.0), 1)
        with self.assertLogs("knav.learning", level="WARNING"):
            self.assertEqual(iteration_budget(1.0, cap=300), 300)
        with self.assertLogs("knav.learning", level="WARNING"):
            self.assertEqual(iteration_budget(0.999999, cap=300), 300)

    def testRequiredRounds(self):
        self.assertEqual(required_rounds(0.5, 1e-8), 27)
        self.assertEqual(required_rounds(0.0), 1)
        self.assertEqual(required_rounds(1.0), math.inf)
        self.assertGreater(required_rounds(0.999999, 1e-8), 18000000)


class DistributedLearningTest(LearningTestCase):
    def testConvergesToOracle(self):
        result = fit_distributed(self.d, self.g, self.L, self.sizes)
        trace = result.trace
        self.assertTrue(trace.converged())
        self.assertTrue(result.converged)
        self.assertFalse(result.capped)
        self.assertLessEqual(trace.objective[-1] / trace.objective[0], 1e-6)
        scale = max(1.0, np.linalg.norm(self.d.Y, "fro"))
        self.assertLessEqual(residual_orthogonality(result.operator, self.d), 1e-6 * scale)
        self.assertLessEqual(trace.defect.max(), 1e-10 * (1.0 + np.linalg.norm(self.d.Y, "fro")))
        self.assertEqual(len(list(trace.rows())), trace.t_max + 1)
        self.assertLessEqual(geometric_rate(trace.objective), result.rho + 0.02)

    def testDecreasesJustBelowBound(self):
        result = fit_distributed(self.d, self.g, self.L, self.sizes, alpha_fraction=0.99, t_max=300)
        self.assertLess(result.trace.objective[-1], result.trace.objective[0])

    def testDivergesAboveBound(self):
        with self.assertLogs("knav.learning", level="WARNING"):
            result = fit_distributed(self.d, self.g, self.L, self.sizes, alpha_fraction=1.5, t_max=200)
        final = result.trace.objective[-1]
        self.assertTrue(not np.isfinite(final) or final > result.trace.objective[0])
        self.assertFalse(result.trace.converged())

    def testSingleAgent(self):
        g = build_graph("ring", 1)
        result = fit_distributed(self.d, g, laplacian(g), tolerance=1e-12)
        oracle = centralized_edmd(self.d).matrix
        error = np.linalg.norm(result.operator.matrix - oracle, "fro")
        self.assertLessEqual(error, 1e-8 * max(1.0, np.linalg.norm(oracle, "fro")))

    def testCappedRunIsReported(self):
        with self.assertLogs("knav.learning", level="WARNING"):
            result = fit_distributed(self.d, self.g, self.L, self.sizes, cap=2)
        self.assertTrue(result.capped)
        self.assertFalse(result.converged)
        diagnostics = result.diagnostics()
        self.assertEqual(diagnostics["rounds"], 2)
        self.assertEqual(diagnostics["rounds_required"], result.required)
        self.assertGreater(diagnostics["objective_ratio"], 1e-6)
        self.assertFalse(spectral_report(result)["converged"])

    def testSingleAgentIsGradientDescent(self):
        g = build_graph("ring", 1)
        agents = init_agents(partition_rows(self.d, 1))
        alpha = 0.5 * alpha_max(build_convergence_matrix(partition_rows(self.d, 1), laplacian(g), self.d.N))
        K = np.zeros((self.d.n, self.d.n))
        for _ in range(40):
            agents = step(agents, alpha, g)
            K = K - alpha * (K @ self.d.X - self.d.Y) @ self.d.X.T
            np.testing.assert_allclose(agents[0].K, K, rtol=1e-9, atol=1e-12)

    def testWarmStartResumes(self):
        first = fit_distributed(self.d, self.g, self.L, self.sizes, t_max=50)
        resumed = fit_distributed(self.d, self.g, self.L, self.sizes, t_max=2000, warm_blocks=first.blocks())
        self.assertLess(resumed.trace.objective[-1], first.trace.objective[-1])
        self.assertAlmostEqual(resumed.trace.objective[0], first.trace.objective[-1], delta=1e-9)

    def testRunWithoutOracle(self):
        agents = init_agents(self.partitions)
        trace = run(agents, 0.01, 3, self.g, self.d)
        self.assertEqual(len(trace), 4)
        self.assertTrue(np.all(np.isnan(trace.objective)))
        with self.assertRaises(LearningError):
            run(agents, 0.01, -1, self.g, self.d)

    def testSpectralReport(self):
        result = fit_distributed(self.d, self.g, self.L, self.sizes)
        report = spectral_report(result)
        self.assertEqual(report["alpha"], 0.5 * report["alpha_max"])
        self.assertAlmostEqual(report["radius_centralized"], spectral_radius(result.oracle), places=12)
        self.assertEqual(len(report["eigenvalues"]["distributed"]), 12)
        self.assertEqual(len(report["eigenvalues"]["convergence"]), 30)
        self.assertEqual(operator_diff_map(result.operator, result.oracle).shape, (12, 12))
        self.assertGreaterEqual(report["hausdorff"], 0.0)


class SpectrumTest(TestCase):
    def testSortedEigenvalues(self):
        values = sorted_eigenvalues(np.diag([0.5, -0.9, 0.1]))
        np.testing.assert_allclose(values.real, [0.1, 0.5, -0.9])

    def testDistance(self):
        a = np.array([0.5 + 0.0j, 0.1 + 0.2j])
        self.assertEqual(spectrum_distance(a, a[::-1]), 0.0)
        self.assertAlmostEqual(spectrum_distance(a, np.array([0.5 + 0.0j])), np.hypot(0.4, 0.2))

    def testRadius(self):
        self.assertAlmostEqual(spectral_radius(np.array([[0.0, -0.8], [0.8, 0.0]])), 0.8)

    def testGeometricRate(self):
        values = 0.9 ** np.arange(60)
        self.assertAlmostEqual(geometric_rate(values), 0.9, places=9)
        with self.assertRaises(LearningError):
            geometric_rate(np.zeros(10))
