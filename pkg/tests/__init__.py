# Test package


