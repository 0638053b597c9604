/**
 * @file dynhom.hpp
 * @brief Convenience umbrella header: pulls in the whole library.
 */
#pragma once

#include <dynhom/voigt.hpp>
#include <dynhom/unit_cell.hpp>
#include <dynhom/kernels.hpp>
#include <dynhom/assembly.hpp>
#include <dynhom/solver.hpp>
#include <dynhom/config.hpp>
#include <dynhom/runner.hpp>
