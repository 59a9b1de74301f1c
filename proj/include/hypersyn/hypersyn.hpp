#pragma once

// Everything except the command line (hypersyn/cli.hpp needs CLI11).

#include "hypersyn/errors.hpp"
#include "hypersyn/geometry.hpp"
#include "hypersyn/autodiff.hpp"
#include "hypersyn/hyperbolic.hpp"
#include "hypersyn/spectral.hpp"
#include "hypersyn/data.hpp"
#include "hypersyn/optim.hpp"
#include "hypersyn/hfan.hpp"
#include "hypersyn/hgcn.hpp"
#include "hypersyn/csht.hpp"
#include "hypersyn/model.hpp"
#include "hypersyn/metrics.hpp"
#include "hypersyn/trainer.hpp"
#include "hypersyn/graph_analysis.hpp"
#include "hypersyn/synthetic.hpp"
