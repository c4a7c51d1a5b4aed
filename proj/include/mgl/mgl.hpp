#pragma once

#include "mgl/assignment.hpp"
#include "mgl/baselines.hpp"
#include "mgl/dataset.hpp"
#include "mgl/datasets.hpp"
#include "mgl/eigensolver.hpp"
#include "mgl/error.hpp"
#include "mgl/eval.hpp"
#include "mgl/experiment.hpp"
#include "mgl/gl_model.hpp"
#include "mgl/graph.hpp"
#include "mgl/image.hpp"
#include "mgl/parallel.hpp"
#include "mgl/rng.hpp"
#include "mgl/solver.hpp"
