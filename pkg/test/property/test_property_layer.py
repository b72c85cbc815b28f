from knav.property import PropertyLayer
from unittest import TestCase


class PropertyLayerTest(TestCase):
    def testCreationWithKwArgs(self):
        pm = PropertyLayer(threshold=0.5)
        self.assertEqual(pm["threshold"], 0.5)

        contents = {"threshold": 0.5}
        pm = PropertyLayer(**contents)
        self.assertEqual(pm["threshold"], 0.5)

    def testCopiesArguments(self):
        contents = {"facets": 8}
        pm = PropertyLayer(**contents)
        contents["facets"] = 12
        self.assertEqual(pm["facets"], 8)

    def testKeyError(self):
        pm = PropertyLayer()
        with self.assertRaises(KeyError):
            pm["facets"]

    def testContains(self):
        pm = PropertyLayer()
        self.assertFalse("facets" in pm)
        pm["facets"] = 8
        self.assertTrue("facets" in pm)

    def testNestedLayers(self):
        pm = PropertyLayer(forecast=PropertyLayer(horizon=14))
        self.assertEqual(pm["forecast"]["horizon"], 14)
        self.assertEqual(pm.keys(), ["forecast"])
        self.assertEqual(pm.__dict__(), {"forecast": pm["forecast"]})
