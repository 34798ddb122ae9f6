#include "ctx/bench.hpp"
