"""Test package.""" 