#include "doctest.h"

TEST_SUITE("recon") {}
