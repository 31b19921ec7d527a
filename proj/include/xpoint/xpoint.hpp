#pragma once

#include "xpoint/linalg.hpp"
#include "xpoint/circuit.hpp"
#include "xpoint/fdsim.hpp"
#include "xpoint/pagerank.hpp"
#include "xpoint/experiments.hpp"
#include "xpoint/serialize.hpp"
