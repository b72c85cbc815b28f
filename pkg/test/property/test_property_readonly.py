from unittest import TestCase
from knav.property import PropertyLayer, PropertyReadOnly, PropertyWriteError


class PropertyReadOnlyTest(TestCase):
    def testPreventsWrites(self):
        layer = PropertyLayer(seed=1)
        ro = PropertyReadOnly(layer)
        with self.assertRaises(PropertyWriteError):
            ro["seed"] = 2
        with self.assertRaises(PropertyWriteError):
            ro["threads"] = 4
        self.assertEqual(ro["seed"], 1)
        self.assertNotIn("threads", ro)

    def testReadsThrough(self):
        ro = PropertyLayer(seed=1, threads=2).readonly()
        self.assertEqual(ro.keys(), ["seed", "threads"])
        self.assertEqual(ro.__dict__(), {"seed": 1, "threads": 2})

    def testSeesUnderlyingChanges(self):
        layer = PropertyLayer(seed=1)
        ro = layer.readonly()
        layer["seed"] = 3
        self.assertEqual(ro["seed"], 3)
