# IO module

