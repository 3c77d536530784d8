# Test suite for pbesolve
