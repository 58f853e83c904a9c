#pragma once
#include <pdcd/core.hpp>
#include <pdcd/rng.hpp>
#include <pdcd/block_spaces.hpp>
#include <pdcd/linalg.hpp>
#include <pdcd/smooth.hpp>
#include <pdcd/prox.hpp>
#include <pdcd/stepsize.hpp>
#include <pdcd/problem.hpp>
#include <pdcd/solver.hpp>
#include <pdcd/diagnostics.hpp>
#include <pdcd/run.hpp>
#include <pdcd/problems.hpp>
#include <pdcd/io.hpp>
