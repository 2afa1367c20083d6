#pragma once

#include "dskd/analysis.hpp"
#include "dskd/divergence.hpp"
#include "dskd/error.hpp"
#include "dskd/eta.hpp"
#include "dskd/gradcheck.hpp"
#include "dskd/io.hpp"
#include "dskd/loss.hpp"
#include "dskd/matrix.hpp"
#include "dskd/pinv.hpp"
#include "dskd/projector.hpp"
#include "dskd/rng.hpp"
#include "dskd/sim.hpp"
#include "dskd/softmax.hpp"
#include "dskd/vocab.hpp"
