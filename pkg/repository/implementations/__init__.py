# Repository implementations module
