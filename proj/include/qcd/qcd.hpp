#pragma once

#include "qcd/adaptive.hpp"
#include "qcd/bounds.hpp"
#include "qcd/divergences.hpp"
#include "qcd/example.hpp"
#include "qcd/hypothesis.hpp"
#include "qcd/io.hpp"
#include "qcd/linalg.hpp"
#include "qcd/random.hpp"
#include "qcd/sdp.hpp"
#include "qcd/symsdp.hpp"
