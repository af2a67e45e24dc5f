/*@ 
  requires INT_MIN <= i + j <= INT_MAX;
  requires INT_MIN <= i + k <= INT_MAX;
  requires INT_MIN <= j + k <= INT_MAX;
  ensures \result == 1 || \result == 2 || \result == 3 || \result == 4;
*/
int testme(int i, int j, int k){
  int type_code;
  if ((i == 0) || (j == 0) || (k == 0)) type_code = 4;     /* line 13 */
  else {
    type_code = 0;
    if (i == j) type_code = type_code + 1;                 /* line 16 */
    if (i == k) type_code = type_code + 2;                 /* line 17 */
    if (j == k) type_code = type_code + 3;                 /* line 18 */
    if (type_code == 0){                                   /* line 19 */
      if ((i+j <= k) || (j+k <= i) || (i+k <= j))          /* line 20 */
	type_code = 4;
      else
	type_code = 1;
      }
    else if (type_code > 3) type_code = 3;                 /* line 25 */
    else if ((type_code == 1) && (i+j > k)) type_code = 2; /* line 26 */
    else if ((type_code == 2) && (i+k > j)) type_code = 2; /* line 27 */
    else if ((type_code == 3) && (j+k > i)) type_code = 2; /* line 28 */
    else type_code = 4;
    }
  return type_code;
}
