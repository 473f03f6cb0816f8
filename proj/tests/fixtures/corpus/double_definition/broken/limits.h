#pragma once

const int kMaxUsers = 64;
