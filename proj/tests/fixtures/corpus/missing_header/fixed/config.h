#pragma once

constexpr int kPort = 8080;
