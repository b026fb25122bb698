# Test suite for vmspod
