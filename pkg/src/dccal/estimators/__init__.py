"""Calibration estimators and the joint angle tracker."""
