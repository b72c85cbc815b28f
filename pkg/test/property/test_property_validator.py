from unittest import TestCase
from knav.property import PropertyLayer, PropertyValidator, PropertyValidationError
from knav.property.validators import NumberValidator, RangeValidator


class PropertyValidatorTest(TestCase):
    def testPassesUnvalidated(self):
        pm = PropertyLayer()
        pv = PropertyValidator(pm)
        pv["boundary"] = "wrap"
        self.assertEqual(pv["boundary"], "wrap")
        self.assertEqual(pm["boundary"], "wrap")

    def testPassesValidValue(self):
        pv = PropertyValidator(PropertyLayer(), {"dt": NumberValidator()})
        pv["dt"] = 0.1
        self.assertEqual(pv["dt"], 0.1)

    def testThrowsErrorOnInvalidValue(self):
        pv = PropertyValidator(PropertyLayer(), {"dt": NumberValidator()})
        with self.assertRaises(PropertyValidationError) as context:
            pv["dt"] = "fast"
        self.assertEqual(context.exception.key, "dt")
        self.assertEqual(context.exception.value, "fast")

    def testValidateAll(self):
        pm = PropertyLayer(nodes=3, facets=2)
        pv = PropertyValidator(pm, {"nodes": RangeValidator(1, integer=True), "facets": RangeValidator(3, integer=True)})
        with self.assertRaises(PropertyValidationError) as context:
            pv.validateAll()
        self.assertEqual(context.exception.key, "facets")
        pm["facets"] = 8
        pv.validateAll()
