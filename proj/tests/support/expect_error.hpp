#pragma once

#include "futsmile/error.hpp"

#include <gtest/gtest.h>

#define EXPECT_FSM_ERROR(stmt, expected)                                     \
    do {                                                                     \
        try {                                                                \
            (void)(stmt);                                                    \
            ADD_FAILURE() << "no error thrown by " #stmt;                    \
        } catch (const futsmile::Error& e) {                                 \
            EXPECT_EQ(e.code(), expected) << e.what();                       \
        }                                                                    \
    } while (0)
