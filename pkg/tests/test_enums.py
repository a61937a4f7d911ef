import unittest

import tests.test_setup  # noqa: F401
from core.enums import (ExperimentMode, NormingKind, ObservableKind, PsiKind, ScheduleKind,
                        SlowlyVaryingKind, StPeteConstant)


class TestEnums(unittest.TestCase):

    def test_observable_kind_from_string_valid(self):
        self.assertEqual(ObservableKind.from_string("return_time"), ObservableKind.RETURN_TIME)
        self.assertEqual(ObservableKind.from_string("PARETO"), ObservableKind.PARETO)

    def test_observable_kind_from_string_invalid(self):
        with self.assertRaises(ValueError) as cm:
            ObservableKind.from_string("gaussian")
        self.assertEqual(str(cm.exception), "Invalid observable kind: gaussian")

    def test_schedule_kind_from_string(self):
        self.assertEqual(ScheduleKind.from_string("power"), ScheduleKind.POWER)
        self.assertEqual(ScheduleKind.from_string("StPete"), ScheduleKind.STPETE)
        self.assertEqual(ScheduleKind.from_string("explicit"), ScheduleKind.EXPLICIT)
        with self.assertRaises(ValueError) as cm:
            ScheduleKind.from_string("log")
        self.assertEqual(str(cm.exception), "Invalid schedule kind: log")

    def test_psi_kind_from_string(self):
        self.assertEqual(PsiKind.from_string("power"), PsiKind.POWER)
        self.assertEqual(PsiKind.from_string("exp_poly"), PsiKind.EXP_POLY)
        with self.assertRaises(ValueError) as cm:
            PsiKind.from_string("exp")
        self.assertEqual(str(cm.exception), "Invalid psi kind: exp")

    def test_experiment_mode_from_string(self):
        self.assertEqual(ExperimentMode.from_string("trim"), ExperimentMode.TRIM)
        self.assertEqual(ExperimentMode.from_string("TRUNCATE"), ExperimentMode.TRUNCATE)
        self.assertEqual(ExperimentMode.from_string("exceedance"), ExperimentMode.EXCEEDANCE)
        with self.assertRaises(ValueError) as cm:
            ExperimentMode.from_string("sweep")
        self.assertEqual(str(cm.exception), "Invalid experiment mode: sweep")

    def test_norming_kind_from_string(self):
        self.assertEqual(NormingKind.from_string("formula"), NormingKind.FORMULA)
        self.assertEqual(NormingKind.from_string("unscaled"), NormingKind.UNSCALED)
        self.assertEqual(NormingKind.from_string("exact"), NormingKind.EXACT)
        with self.assertRaises(ValueError) as cm:
            NormingKind.from_string("approx")
        self.assertEqual(str(cm.exception), "Invalid norming kind: approx")

    def test_stpete_constant_from_string(self):
        self.assertEqual(StPeteConstant.from_string("derived"), StPeteConstant.DERIVED)
        self.assertEqual(StPeteConstant.from_string("stated"), StPeteConstant.STATED)
        with self.assertRaises(ValueError) as cm:
            StPeteConstant.from_string("both")
        self.assertEqual(str(cm.exception), "Invalid St. Petersburg constant: both")

    def test_slowly_varying_kind_from_string(self):
        self.assertEqual(SlowlyVaryingKind.from_string("one"), SlowlyVaryingKind.ONE)
        self.assertEqual(SlowlyVaryingKind.from_string("constant"), SlowlyVaryingKind.CONSTANT)
        self.assertEqual(SlowlyVaryingKind.from_string("LOG"), SlowlyVaryingKind.LOG)
        with self.assertRaises(ValueError) as cm:
            SlowlyVaryingKind.from_string("loglog")
        self.assertEqual(str(cm.exception), "Invalid slowly varying kind: loglog")


if __name__ == '__main__':
    unittest.main()
