#include "doctest.h"

TEST_SUITE("optim") {}
