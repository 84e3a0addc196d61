#pragma once

#include "loopss/ring.hpp"
#include "loopss/linalg.hpp"
#include "loopss/algebra.hpp"
#include "loopss/spectral_sequence.hpp"
#include "loopss/naturality.hpp"
#include "loopss/scenario_io.hpp"
#include "loopss/report.hpp"
